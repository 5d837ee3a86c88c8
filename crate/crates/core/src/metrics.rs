//! Recovery metrics and report rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use num_traits::Float;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::attack::AttackResult;
use crate::error::{Error, Result};
use crate::locality::{SnapshotDiff, SIZES};

pub const REPORT_SCHEMA: &str = "netlock-report/1";

/// Weights of exact, one-gate-off and two-gates-off recoveries.
pub const R_WEIGHTS: [f64; 3] = [1.0, 0.66, 0.33];

/// Weighted recovery score from the percentages of anchors recovered with
/// 0, 1 and 2 gate errors (and no link error).
pub fn r_metric<T: Float>(ge0: T, ge1: T, ge2: T) -> Result<T> {
    let hundred = T::from(100.0).unwrap();
    let mut r = T::zero();
    for (v, w) in [ge0, ge1, ge2].into_iter().zip(R_WEIGHTS) {
        if !(v >= T::zero() && v <= hundred) {
            return Err(Error::OutOfRange(v.to_f64().unwrap_or(f64::NAN)));
        }
        r = r + v * T::from(w).unwrap();
    }
    Ok(r)
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn ser2<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(round2(*v))
}

fn ser2_array<S: Serializer>(v: &[f64; 3], s: S) -> std::result::Result<S::Ok, S::Error> {
    v.map(round2).serialize(s)
}

fn ser2_map<S: Serializer>(v: &BTreeMap<usize, f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    v.iter()
        .map(|(k, x)| (*k, round2(*x)))
        .collect::<BTreeMap<_, _>>()
        .serialize(s)
}

/// Complete recoveries within one change level.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LevelRecovery {
    pub recovered: usize,
    pub total: usize,
}

impl LevelRecovery {
    pub fn percent(&self) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.recovered as f64 / self.total as f64)
    }
}

impl fmt::Display for LevelRecovery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.percent() {
            Some(p) => write!(f, "{p:.2} ({}/{})", self.recovered, self.total),
            None => write!(f, "NAN ({}/{})", self.recovered, self.total),
        }
    }
}

impl FromStr for LevelRecovery {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("malformed level recovery `{s}`"));
        let (_, frac) = s.split_once('(').ok_or_else(bad)?;
        let (num, den) = frac.trim_end_matches(')').split_once('/').ok_or_else(bad)?;
        Ok(LevelRecovery {
            recovered: num.trim().parse().map_err(|_| bad())?,
            total: den.trim().parse().map_err(|_| bad())?,
        })
    }
}

impl Serialize for LevelRecovery {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LevelRecovery {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One circuit's line in a recovery table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub circuit: String,
    pub heuristic: String,
    #[serde(serialize_with = "ser2")]
    pub key_ratio: f64,
    pub anchors: usize,
    /// Percent of anchors with 0, 1, 2 gate errors and no link error.
    #[serde(serialize_with = "ser2_array")]
    pub ge: [f64; 3],
    #[serde(serialize_with = "ser2")]
    pub r_metric: f64,
    pub levels: [LevelRecovery; 3],
    /// Change-prediction accuracy (percent) per locality size.
    #[serde(serialize_with = "ser2_map")]
    pub change_accuracy: BTreeMap<usize, f64>,
}

fn ge_percentages<'a>(diffs: impl Iterator<Item = &'a SnapshotDiff>, n: usize) -> [f64; 3] {
    let mut counts = [0usize; 3];
    for d in diffs {
        if d.link_error == 0 && d.gate_error < 3 {
            counts[d.gate_error] += 1;
        }
    }
    counts.map(|c| 100.0 * c as f64 / n as f64)
}

/// Summarise attack results that carry ground truth.
pub fn aggregate(
    circuit: &str,
    heuristic: &str,
    key_ratio: f64,
    results: &[AttackResult],
) -> Result<RecoveryRow> {
    let mut diffs = Vec::with_capacity(results.len());
    let mut levels = [LevelRecovery::default(); 3];
    let mut correct: BTreeMap<usize, usize> = SIZES.map(|s| (s, 0)).collect();
    for r in results {
        let (Some(t), Some(d)) = (&r.truth, &r.diff) else {
            return Err(Error::MissingTruth(r.anchor.clone()));
        };
        diffs.push(*d);
        let l = &mut levels[t.level.number() as usize - 1];
        l.total += 1;
        if d.is_exact() {
            l.recovered += 1;
        }
        for (size, &changed) in &r.changed_by_size {
            if changed == t.level.is_changed() {
                *correct.entry(*size).or_default() += 1;
            }
        }
    }
    let n = results.len();
    let ge = if n == 0 {
        [0.0; 3]
    } else {
        ge_percentages(diffs.iter(), n)
    };
    let change_accuracy = correct
        .into_iter()
        .map(|(s, c)| (s, if n == 0 { 0.0 } else { 100.0 * c as f64 / n as f64 }))
        .collect();
    Ok(RecoveryRow {
        circuit: circuit.to_string(),
        heuristic: heuristic.to_string(),
        key_ratio,
        anchors: n,
        ge,
        r_metric: r_metric(ge[0], ge[1], ge[2])?,
        levels,
        change_accuracy,
    })
}

/// R-metric each single-size reconstruction member would score alone.
pub fn member_r_metrics(results: &[AttackResult]) -> Result<BTreeMap<usize, f64>> {
    let sizes: BTreeSet<usize> = results
        .iter()
        .flat_map(|r| r.member_diffs.keys().copied())
        .collect();
    let mut out = BTreeMap::new();
    for size in sizes {
        let diffs = results
            .iter()
            .map(|r| {
                r.member_diffs
                    .get(&size)
                    .ok_or_else(|| Error::MissingTruth(r.anchor.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let ge = ge_percentages(diffs.into_iter(), results.len());
        out.insert(size, r_metric(ge[0], ge[1], ge[2])?);
    }
    Ok(out)
}

/// Change-level populations of results with truth, in level order.
pub fn level_populations(results: &[AttackResult]) -> [usize; 3] {
    let mut counts = [0; 3];
    for r in results.iter().filter_map(|r| r.truth.as_ref()) {
        counts[r.level.number() as usize - 1] += 1;
    }
    counts
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryTable {
    pub title: String,
    pub rows: Vec<RecoveryRow>,
}

/// Versioned report with the settings that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub tables: Vec<RecoveryTable>,
}

const CSV_HEADER: [&str; 17] = [
    "circuit", "anchors", "ge0", "ge1", "ge2", "r_metric", "l1_rec", "l2_rec", "l3_rec",
    "cp_acc_n3", "cp_acc_n4", "cp_acc_n5", "cp_acc_n6", "cp_acc_n7", "cp_acc_n8", "cp_acc_n9",
    "cp_acc_n10",
];

fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

impl Report {
    pub fn new(config: serde_json::Value, tables: Vec<RecoveryTable>) -> Self {
        Report {
            schema: REPORT_SCHEMA.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            tables,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Report> {
        let r: Report = serde_json::from_str(text)?;
        if r.schema != REPORT_SCHEMA {
            return Err(Error::Invalid(format!("unsupported report schema `{}`", r.schema)));
        }
        Ok(r)
    }

    /// Every table as CSV, one header per table; provenance and table
    /// titles go into `#` comment lines.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# schema: {}", self.schema)?;
        writeln!(w, "# tool_version: {}", self.tool_version)?;
        writeln!(w, "# config: {}", serde_json::to_string(&self.config)?)?;
        for t in &self.tables {
            writeln!(w, "# table: {}", t.title)?;
            let mut cw = csv::Writer::from_writer(&mut w);
            let mut header: Vec<&str> = CSV_HEADER.to_vec();
            header.extend(["heuristic", "key_ratio"]);
            cw.write_record(&header)?;
            for r in &t.rows {
                let mut rec = vec![
                    r.circuit.clone(),
                    r.anchors.to_string(),
                    fmt2(r.ge[0]),
                    fmt2(r.ge[1]),
                    fmt2(r.ge[2]),
                    fmt2(r.r_metric),
                ];
                rec.extend(r.levels.iter().map(|l| l.to_string()));
                rec.extend(SIZES.map(|s| r.change_accuracy.get(&s).map_or(String::new(), |v| fmt2(*v))));
                rec.push(r.heuristic.clone());
                rec.push(fmt2(r.key_ratio));
                cw.write_record(&rec)?;
            }
            cw.flush()?;
        }
        Ok(())
    }

    /// Parse tables written by [`Report::write_csv`]; provenance is not
    /// recovered.
    pub fn read_csv_tables<R: Read>(r: R) -> Result<Vec<RecoveryTable>> {
        let mut text = String::new();
        let mut r = r;
        r.read_to_string(&mut text)?;
        let mut tables = Vec::new();
        let mut chunk: Option<(String, String)> = None;
        let flush = |chunk: Option<(String, String)>, tables: &mut Vec<RecoveryTable>| -> Result<()> {
            if let Some((title, body)) = chunk {
                tables.push(RecoveryTable {
                    title,
                    rows: parse_rows(&body)?,
                });
            }
            Ok(())
        };
        for line in text.lines() {
            if let Some(title) = line.strip_prefix("# table: ") {
                flush(chunk.take(), &mut tables)?;
                chunk = Some((title.to_string(), String::new()));
            } else if !line.starts_with('#') {
                match chunk.as_mut() {
                    Some((_, body)) => {
                        body.push_str(line);
                        body.push('\n');
                    }
                    None if line.trim().is_empty() => {}
                    None => return Err(Error::Invalid("CSV rows before any table title".into())),
                }
            }
        }
        flush(chunk, &mut tables)?;
        Ok(tables)
    }

    /// Human-readable tables: one section per table and heuristic, plus a
    /// key-ratio comparison when several ratios are present.
    pub fn to_markdown(&self) -> String {
        let mut out = format!("# Recovery report\n\nTool version {}.\n\n", self.tool_version);
        out.push_str(&format!(
            "Configuration:\n\n```json\n{}\n```\n\n",
            serde_json::to_string_pretty(&self.config).unwrap_or_default()
        ));
        for t in &self.tables {
            out.push_str(&format!("## {}\n\n", t.title));
            let heuristics: BTreeSet<&str> = t.rows.iter().map(|r| r.heuristic.as_str()).collect();
            for h in &heuristics {
                out.push_str(&format!("### Heuristic {h}\n\n"));
                out.push_str("| circuit | key ratio | anchors | G=0 L=0 | G=1 L=0 | G=2 L=0 | R | Level 1 | Level 2 | Level 3 |\n");
                out.push_str("|---|---|---|---|---|---|---|---|---|---|\n");
                for r in t.rows.iter().filter(|r| r.heuristic == *h) {
                    out.push_str(&format!(
                        "| {} | {:.2} | {} | {:.2} | {:.2} | {:.2} | {:.2} | {} | {} | {} |\n",
                        r.circuit, r.key_ratio, r.anchors, r.ge[0], r.ge[1], r.ge[2], r.r_metric,
                        r.levels[0], r.levels[1], r.levels[2]
                    ));
                }
                out.push('\n');
                out.push_str("Change-prediction accuracy by locality size:\n\n| circuit | key ratio |");
                for s in SIZES {
                    out.push_str(&format!(" n={s} |"));
                }
                out.push_str("\n|---|---|");
                out.push_str(&"---|".repeat(SIZES.count()));
                out.push('\n');
                for r in t.rows.iter().filter(|r| r.heuristic == *h) {
                    out.push_str(&format!("| {} | {:.2} |", r.circuit, r.key_ratio));
                    for s in SIZES {
                        match r.change_accuracy.get(&s) {
                            Some(v) => out.push_str(&format!(" {v:.2} |")),
                            None => out.push_str(" - |"),
                        }
                    }
                    out.push('\n');
                }
                out.push('\n');
            }
            let ratios: Vec<f64> = {
                let mut v: Vec<f64> = t.rows.iter().map(|r| r.key_ratio).collect();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v
            };
            if ratios.len() > 1 {
                out.push_str("### R by key ratio\n\n| circuit | heuristic |");
                for k in &ratios {
                    out.push_str(&format!(" {k}x |"));
                }
                out.push_str("\n|---|---|");
                out.push_str(&"---|".repeat(ratios.len()));
                out.push('\n');
                let keys: BTreeSet<(&str, &str)> = t
                    .rows
                    .iter()
                    .map(|r| (r.circuit.as_str(), r.heuristic.as_str()))
                    .collect();
                for (c, h) in keys {
                    out.push_str(&format!("| {c} | {h} |"));
                    for k in &ratios {
                        match t.rows.iter().find(|r| r.circuit == c && r.heuristic == h && r.key_ratio == *k) {
                            Some(r) => out.push_str(&format!(" {:.2} |", r.r_metric)),
                            None => out.push_str(" - |"),
                        }
                    }
                    out.push('\n');
                }
                out.push('\n');
            }
        }
        out
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Invalid(format!("malformed number `{s}`")))
}

fn parse_rows(body: &str) -> Result<Vec<RecoveryRow>> {
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let header = rdr.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Invalid(format!("missing CSV column `{name}`")))
    };
    let idx: BTreeMap<&str, usize> = CSV_HEADER
        .iter()
        .chain(&["heuristic", "key_ratio"])
        .map(|&c| col(c).map(|i| (c, i)))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |c: &str| rec.get(idx[c]).unwrap_or("");
        let mut change_accuracy = BTreeMap::new();
        for s in SIZES {
            let v = get(&format!("cp_acc_n{s}"));
            if !v.is_empty() {
                change_accuracy.insert(s, parse_f64(v)?);
            }
        }
        rows.push(RecoveryRow {
            circuit: get("circuit").to_string(),
            heuristic: get("heuristic").to_string(),
            key_ratio: parse_f64(get("key_ratio"))?,
            anchors: get("anchors")
                .parse()
                .map_err(|_| Error::Invalid("malformed anchor count".into()))?,
            ge: [parse_f64(get("ge0"))?, parse_f64(get("ge1"))?, parse_f64(get("ge2"))?],
            r_metric: parse_f64(get("r_metric"))?,
            levels: [get("l1_rec").parse()?, get("l2_rec").parse()?, get("l3_rec").parse()?],
            change_accuracy,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{KeyBit, Truth};
    use crate::locality::extract_locality;
    use crate::netlist::parse_bench;
    use crate::rewrite::ChangeLevel;

    #[test]
    fn r_metric_examples() {
        assert!((r_metric(57.49, 25.83, 4.16).unwrap() - 75.91).abs() < 0.05);
        assert!((r_metric(78.54f32, 12.70, 8.43).unwrap() - 89.70).abs() < 0.05);
        assert_eq!(r_metric(100.0, 0.0, 0.0).unwrap(), 100.0);
        assert!(matches!(r_metric(101.0, 0.0, 0.0), Err(Error::OutOfRange(_))));
        assert!(r_metric(-1.0, 0.0, 0.0).is_err());
        assert!(r_metric(f64::NAN, 0.0, 0.0).is_err());
    }

    fn result(anchor: &str, level: ChangeLevel, gate_error: usize, link_error: usize) -> AttackResult {
        let n = parse_bench("INPUT(a)\nINPUT(keyinput0)\nOUTPUT(y)\ny = XOR(a, keyinput0)").unwrap();
        let s = extract_locality(&n, "keyinput0", 3).unwrap();
        AttackResult {
            anchor: anchor.into(),
            boosted: false,
            predicted_changed: level.is_changed(),
            change_confidence: 1.0,
            changed_by_size: SIZES.map(|sz| (sz, sz % 2 == 0)).collect(),
            label: 0,
            label_confidence: 1.0,
            low_confidence: false,
            member_labels: BTreeMap::new(),
            observed: s.clone(),
            predicted: s.clone(),
            key_bit: KeyBit::Zero,
            truth: Some(Truth {
                snapshot: s,
                level,
                key_bit: false,
            }),
            diff: Some(SnapshotDiff {
                gate_error,
                link_error,
            }),
            member_diffs: BTreeMap::new(),
        }
    }

    #[test]
    fn aggregate_examples() {
        let rs = vec![
            result("k0", ChangeLevel::Unchanged, 0, 0),
            result("k1", ChangeLevel::KeyGate, 1, 0),
            result("k2", ChangeLevel::KeyGate, 2, 0),
            result("k3", ChangeLevel::KeyGate, 0, 1),
        ];
        let row = aggregate("t", "rnd", 1.0, &rs).unwrap();
        assert_eq!(row.ge, [25.0, 25.0, 25.0]);
        assert!((row.r_metric - 49.75).abs() < 1e-9);
        assert_eq!(row.levels[0], LevelRecovery { recovered: 1, total: 1 });
        assert_eq!(row.levels[1].to_string(), "NAN (0/0)");
        assert_eq!(row.levels[2].to_string(), "0.00 (0/3)");
        // Unchanged anchor is right at odd sizes, changed ones at even sizes.
        assert_eq!(row.change_accuracy[&3], 25.0);
        assert_eq!(row.change_accuracy[&4], 75.0);

        let mut rev = rs.clone();
        rev.reverse();
        assert_eq!(aggregate("t", "rnd", 1.0, &rev).unwrap(), row);

        let all = vec![result("k0", ChangeLevel::Unchanged, 0, 0)];
        let row = aggregate("t", "rnd", 1.0, &all).unwrap();
        assert_eq!((row.ge[0], row.r_metric), (100.0, 100.0));

        let mut missing = rs[0].clone();
        missing.diff = None;
        assert!(matches!(aggregate("t", "rnd", 1.0, &[missing]), Err(Error::MissingTruth(_))));
    }

    #[test]
    fn csv_and_json_round_trip() {
        let rs = vec![
            result("k0", ChangeLevel::Unchanged, 0, 0),
            result("k1", ChangeLevel::Neighborhood, 1, 0),
            result("k2", ChangeLevel::KeyGate, 0, 0),
        ];
        let row = aggregate("c\"x", "cs", 0.5, &rs).unwrap();
        let report = Report::new(
            serde_json::json!({"seed": 3}),
            vec![RecoveryTable {
                title: "boosted".into(),
                rows: vec![row.clone()],
            }],
        );
        let json = report.to_json().unwrap();
        let back = Report::from_json(&json).unwrap();
        let mut csv_out = Vec::new();
        back.write_csv(&mut csv_out).unwrap();
        let text = String::from_utf8(csv_out).unwrap();
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 2);
        let tables = Report::read_csv_tables(text.as_bytes()).unwrap();
        assert_eq!(tables.len(), 1);
        let parsed = &tables[0].rows[0];
        assert_eq!(parsed.circuit, row.circuit);
        assert_eq!(parsed.levels, row.levels);
        assert_eq!(parsed.ge.map(round2), row.ge.map(round2));
        assert_eq!(round2(parsed.r_metric), round2(row.r_metric));
        assert_eq!(parsed.change_accuracy, row.change_accuracy.iter().map(|(k, v)| (*k, round2(*v))).collect());
        assert!(Report::from_json(&json.replace(REPORT_SCHEMA, "other/9")).is_err());
    }

    #[test]
    fn markdown_has_section_per_heuristic() {
        let rs = vec![result("k0", ChangeLevel::Unchanged, 0, 0)];
        let rows = ["cs", "cy", "sll"]
            .iter()
            .flat_map(|h| [0.5, 1.0].map(|k| aggregate("c17", h, k, &rs).unwrap()))
            .collect();
        let md = Report::new(serde_json::json!({}), vec![RecoveryTable { title: "boosted".into(), rows }])
            .to_markdown();
        for h in ["cs", "cy", "sll"] {
            assert!(md.contains(&format!("### Heuristic {h}")));
        }
        assert!(md.contains("### R by key ratio"));
        assert!(md.contains("0.5x"));
    }
}
