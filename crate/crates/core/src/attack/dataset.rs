use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::lock::{lock, random_key, HeuristicKind, InsertionHeuristic};
use crate::locality::{Locality, LocalityExtractor, Snapshot, MIN_SIZE, SIZES, SNAPSHOT_SIZE};
use crate::netlist::Netlist;
use crate::rewrite::{classify_with, resynthesize, ChangeLevel, RewriteRule};

/// One key-gate seen before and after re-synthesis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub anchor: String,
    pub instance: usize,
    /// Post-synthesis localities for every size, smallest first.
    pub localities: Vec<Locality>,
    /// Pre-synthesis snapshot.
    pub truth: Snapshot,
    pub changed: bool,
    pub level: ChangeLevel,
    pub key_bit: bool,
}

impl DatasetRecord {
    pub fn locality(&self, size: usize) -> Result<&Locality> {
        size.checked_sub(MIN_SIZE)
            .and_then(|i| self.localities.get(i))
            .ok_or(Error::LocalitySize(size))
    }

    /// The post-synthesis snapshot.
    pub fn observed(&self) -> &Snapshot {
        &self.localities[SNAPSHOT_SIZE - MIN_SIZE]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<DatasetRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record count per level, in level order.
    pub fn level_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for r in &self.records {
            counts[r.level.number() as usize - 1] += 1;
        }
        counts
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads records, skipping blank lines and `#` comment lines.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Dataset> {
        let mut records = Vec::new();
        for line in r.lines() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            records.push(serde_json::from_str(t)?);
        }
        Ok(Dataset { records })
    }
}

/// How training data is manufactured from the attacked netlist.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetParams {
    pub instances: usize,
    pub key_bits: usize,
    pub heuristic: HeuristicKind,
    pub seed: u64,
    pub max_passes: usize,
}

/// Lock `n` with `key`, re-synthesise, and describe every new key-gate.
///
/// Returns the records and the re-synthesised netlist.
pub(crate) fn lock_and_describe(
    n: &Netlist,
    key: &[bool],
    h: &InsertionHeuristic,
    rules: &[RewriteRule],
    max_passes: usize,
    instance: usize,
) -> Result<(Vec<DatasetRecord>, Netlist)> {
    let (locked, recs) = lock(n, key, h)?;
    let out = resynthesize(&locked, rules, max_passes)?;
    let pre = LocalityExtractor::new(&locked);
    let post = LocalityExtractor::new(&out.netlist);
    let mut records = Vec::with_capacity(recs.len());
    for rec in &recs {
        let level = classify_with(&pre, &post, rec, &out.log)?;
        let localities = SIZES
            .map(|s| post.extract(&rec.key_input, s))
            .collect::<Result<Vec<_>>>()?;
        records.push(DatasetRecord {
            anchor: rec.key_input.clone(),
            instance,
            localities,
            truth: pre.extract(&rec.key_input, SNAPSHOT_SIZE)?,
            changed: level.is_changed(),
            level,
            key_bit: rec.key_bit,
        });
    }
    Ok((records, out.netlist))
}

/// Treat `obfuscated` as a golden design: lock it again `instances` times
/// with fresh keys, re-synthesise, and label the new key-gates only.
pub fn generate_dataset(
    obfuscated: &Netlist,
    params: &DatasetParams,
    rules: &[RewriteRule],
) -> Result<Dataset> {
    if params.instances == 0 {
        return Err(Error::Invalid("at least one instance is required".into()));
    }
    let per_instance: Vec<Vec<DatasetRecord>> = (0..params.instances)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(params.seed, i as u64);
            let key = random_key(params.key_bits, seed);
            let h = InsertionHeuristic::new(params.heuristic, derive_seed(seed, 1));
            lock_and_describe(obfuscated, &key, &h, rules, params.max_passes, i).map(|r| r.0)
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        records: per_instance.into_iter().flatten().collect(),
    })
}
