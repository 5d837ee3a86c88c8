use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use netlock::attack::{
    evaluate, generate_dataset, run_attack, train_models, AttackResult, Dataset, DatasetParams,
    EvalParams, KeyBit, TrainParams,
};
use netlock::lock::{format_key, lock as lock_netlist, parse_key, random_key, InsertionHeuristic, KeyGateRecord};
use netlock::metrics::{aggregate, RecoveryTable, Report};
use netlock::netlist::{export_dot, parse_bench, write_bench_with_header, NodeColor};
use netlock::rewrite::{builtin_rules, replay, resynthesize};
use netlock::sim::{bind_key, check_equivalence, check_equivalence_keyed, EquivalenceReport};
use netlock::{circuits, derive_seed, AttackModels, Netlist};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize, Deserialize)]
struct KeyFile {
    tool_version: String,
    config: RunConfig,
    key: String,
    records: Vec<KeyGateRecord>,
}

#[derive(Serialize, Deserialize)]
struct ModelsFile {
    tool_version: String,
    config: RunConfig,
    models: AttackModels,
}

#[derive(Serialize, Deserialize)]
struct AttackRun {
    boosted: bool,
    /// Recovered key, `x` where the bit is unknown.
    key: String,
    results: Vec<AttackResult>,
}

#[derive(Serialize, Deserialize)]
struct AttackFile {
    tool_version: String,
    config: RunConfig,
    runs: Vec<AttackRun>,
}

fn read_bench(path: &Path) -> Result<Netlist, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse_bench(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn out_dir(c: &RunConfig) -> Result<&Path, CliError> {
    let dir = c.require(&c.output, "out")?;
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn to_json<T: Serialize>(v: &T) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_vec_pretty(v)?;
    s.push(b'\n');
    Ok(s)
}

fn expect_equivalent(what: &str, r: EquivalenceReport) -> Result<(), CliError> {
    if r.equivalent {
        Ok(())
    } else {
        Err(CliError::Internal(format!(
            "{what} changed the function (counterexample {:?})",
            r.first_counterexample
        )))
    }
}

fn train_params(c: &RunConfig) -> TrainParams {
    TrainParams {
        forest: c.forest.clone(),
        network: c.network.clone(),
        boost_size: c.boost_size,
    }
}

fn boost_modes(c: &RunConfig) -> Vec<bool> {
    match c.boost {
        Some(b) => vec![b],
        None => vec![true, false],
    }
}

pub fn lock(c: &RunConfig) -> Result<(), CliError> {
    let input = c.require(&c.input, "in")?;
    let out = c.require(&c.output, "out")?;
    let n = read_bench(input)?;
    let key = match (&c.key, c.bits) {
        (Some(k), bits) => {
            let key = parse_key(k)?;
            if bits.is_some_and(|b| b != key.len()) {
                return Err(CliError::Usage("--bits disagrees with the length of --key".into()));
            }
            key
        }
        (None, Some(bits)) => random_key(bits, derive_seed(c.seed, 0)),
        (None, None) => return Err(CliError::Usage("`lock` needs --bits or --key".into())),
    };
    let h = InsertionHeuristic::new(c.single_heuristic()?, c.seed);
    let (locked, records) = lock_netlist(&n, &key, &h)?;
    if n.key_inputs().is_empty() {
        expect_equivalent("locking", check_equivalence(&n, &bind_key(&locked, &key)?, c.budget)?)?;
    }
    write_file(out, write_bench_with_header(&locked, &c.header()).as_bytes())?;
    let keys_path = c.keys.clone().unwrap_or_else(|| with_suffix(out, ".keys.json"));
    let file = KeyFile {
        tool_version: VERSION.into(),
        config: c.clone(),
        key: format_key(&key),
        records,
    };
    write_file(&keys_path, &to_json(&file)?)?;
    println!(
        "locked {} with {} key bits ({} gates)",
        input.display(),
        key.len(),
        locked.gate_count()
    );
    Ok(())
}

pub fn resynth(c: &RunConfig) -> Result<(), CliError> {
    let input = c.require(&c.input, "in")?;
    let out = c.require(&c.output, "out")?;
    let n = read_bench(input)?;
    let rules = builtin_rules();
    let r = resynthesize(&n, &rules, c.max_passes)?;
    let eq = if n.key_inputs().is_empty() {
        check_equivalence(&n, &r.netlist, c.budget)?
    } else {
        check_equivalence_keyed(&n, &r.netlist, c.budget)?
    };
    expect_equivalent("re-synthesis", eq)?;
    if replay(&n, &r.log, &rules)? != r.netlist {
        return Err(CliError::Internal("rewrite log does not replay to the output".into()));
    }
    write_file(out, write_bench_with_header(&r.netlist, &c.header()).as_bytes())?;
    let log_path = c.log.clone().unwrap_or_else(|| with_suffix(out, ".log.jsonl"));
    let mut buf = Vec::new();
    for line in c.header() {
        writeln!(buf, "# {line}")?;
    }
    r.log.write_jsonl(&mut buf)?;
    write_file(&log_path, &buf)?;
    println!(
        "{} rewrites in {} passes, {} gates -> {}{}",
        r.log.len(),
        r.passes,
        n.gate_count(),
        r.netlist.gate_count(),
        if r.converged { "" } else { " (pass limit reached)" }
    );
    Ok(())
}

fn dataset_params(c: &RunConfig, victim: &Netlist) -> Result<DatasetParams, CliError> {
    let bits = c
        .instance_bits
        .or(c.bits)
        .unwrap_or(victim.key_inputs().len());
    if bits == 0 {
        return Err(CliError::Usage("key size per instance is zero; pass --bits".into()));
    }
    Ok(DatasetParams {
        instances: c.instances,
        key_bits: bits,
        heuristic: c.single_heuristic()?,
        seed: c.seed,
        max_passes: c.max_passes,
    })
}

fn dataset_bytes(c: &RunConfig, d: &Dataset) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    for line in c.header() {
        writeln!(buf, "# {line}")?;
    }
    d.write_jsonl(&mut buf)?;
    Ok(buf)
}

pub fn dataset(c: &RunConfig) -> Result<(), CliError> {
    let input = c.require(&c.input, "in")?;
    let out = c.require(&c.output, "out")?;
    let victim = read_bench(input)?;
    let d = generate_dataset(&victim, &dataset_params(c, &victim)?, &builtin_rules())?;
    write_file(out, &dataset_bytes(c, &d)?)?;
    let [l1, l2, l3] = d.level_counts();
    println!("{} records (L1 {l1}, L2 {l2}, L3 {l3})", d.len());
    Ok(())
}

pub fn train(c: &RunConfig) -> Result<(), CliError> {
    let path = c.require(&c.dataset, "dataset")?;
    let out = c.require(&c.output, "out")?;
    let f = fs::File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let d = Dataset::read_jsonl(BufReader::new(f))?;
    let models = train_models::<f64>(&d, &train_params(c))?;
    println!(
        "trained on {} records, {} reconstruction labels{}",
        d.len(),
        models.catalog().len(),
        if models.degenerate { " (degenerate)" } else { "" }
    );
    let file = ModelsFile {
        tool_version: VERSION.into(),
        config: c.clone(),
        models,
    };
    write_file(out, &to_json(&file)?)
}

fn recovered_key(results: &[AttackResult]) -> String {
    results
        .iter()
        .map(|r| r.key_bit.to_string())
        .collect()
}

fn overlay(victim: &Netlist, results: &[AttackResult]) -> String {
    let mut colors = BTreeMap::new();
    for r in results {
        let color = match (r.recovered(), &r.truth, r.key_bit) {
            (true, Some(_), _) => NodeColor::Green,
            (false, Some(_), _) => NodeColor::Red,
            (_, None, KeyBit::Unknown) => NodeColor::Gray,
            (_, None, _) if r.predicted_changed => NodeColor::Yellow,
            _ => NodeColor::Green,
        };
        for id in r.observed.gate_ids.iter().flatten() {
            colors.entry(id.clone()).or_insert(color);
        }
    }
    export_dot(victim, &colors)
}

pub fn attack(c: &RunConfig) -> Result<(), CliError> {
    let input = c.require(&c.input, "in")?;
    let dir = out_dir(c)?;
    let victim = read_bench(input)?;
    let models = match &c.models {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<ModelsFile>(&text)?.models
        }
        None => {
            let d = generate_dataset(&victim, &dataset_params(c, &victim)?, &builtin_rules())?;
            write_file(&dir.join("dataset.jsonl"), &dataset_bytes(c, &d)?)?;
            let models = train_models::<f64>(&d, &train_params(c))?;
            let file = ModelsFile {
                tool_version: VERSION.into(),
                config: c.clone(),
                models,
            };
            write_file(&dir.join("models.json"), &to_json(&file)?)?;
            file.models
        }
    };
    let mut runs = Vec::new();
    for boosted in boost_modes(c) {
        let results = run_attack(&victim, &models, boosted)?;
        let key = recovered_key(&results);
        println!("{} key: {key}", if boosted { "boosted" } else { "unboosted" });
        runs.push(AttackRun { boosted, key, results });
    }
    write_file(&dir.join("overlay.dot"), overlay(&victim, &runs[0].results).as_bytes())?;
    let file = AttackFile {
        tool_version: VERSION.into(),
        config: c.clone(),
        runs,
    };
    write_file(&dir.join("attack.json"), &to_json(&file)?)
}

fn load_original(spec: &str) -> Result<(String, Netlist), CliError> {
    let path = Path::new(spec);
    if path.exists() {
        let name = path
            .file_stem()
            .map_or_else(|| spec.to_string(), |s| s.to_string_lossy().into_owned());
        return Ok((name, read_bench(path)?));
    }
    match circuits::load(spec) {
        Some(n) => Ok((spec.to_string(), n?)),
        None => Err(CliError::Input(format!(
            "`{spec}` is neither a file nor a bundled circuit ({})",
            circuits::NAMES.join(", ")
        ))),
    }
}

pub fn eval(c: &RunConfig) -> Result<(), CliError> {
    if c.originals.is_empty() {
        return Err(CliError::Usage(format!("`{}` needs --original", c.command)));
    }
    let bits = *c.require(&c.bits, "bits")?;
    let dir = out_dir(c)?;
    let rules = builtin_rules();
    let modes = boost_modes(c);
    let mut tables: Vec<RecoveryTable> = modes
        .iter()
        .map(|&b| RecoveryTable {
            title: if b { "Change-prediction boosted" } else { "Unboosted" }.into(),
            rows: Vec::new(),
        })
        .collect();
    for spec in &c.originals {
        let (name, original) = load_original(spec)?;
        for &h in &c.heuristics {
            for &ratio in &c.key_ratios {
                let key_bits = ((bits as f64 * ratio).round() as usize).max(1);
                let params = EvalParams {
                    key_bits,
                    heuristic: h,
                    seed: c.seed,
                    instances: c.instances,
                    instance_key_bits: c.instance_bits,
                    max_passes: c.max_passes,
                    train: train_params(c),
                };
                let e = evaluate::<f64>(&original, &params, &rules)?;
                for (t, &b) in tables.iter_mut().zip(&modes) {
                    let results = if b { &e.boosted } else { &e.unboosted };
                    let row = aggregate(&name, h.name(), ratio, results)?;
                    println!(
                        "{name} {h} {ratio}x ({key_bits} bits) {}: R {:.2}, exact {:.2}%",
                        if b { "boosted" } else { "unboosted" },
                        row.r_metric,
                        row.ge[0]
                    );
                    t.rows.push(row);
                }
            }
        }
    }
    let report = Report::new(c.to_json(), tables);
    write_file(&dir.join("report.json"), report.to_json()?.as_bytes())?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write_file(&dir.join("report.csv"), &csv)?;
    write_file(&dir.join("report.md"), report.to_markdown().as_bytes())
}

pub fn report(c: &RunConfig) -> Result<(), CliError> {
    let input = c.require(&c.input, "in")?;
    let text = fs::read_to_string(input).map_err(|e| CliError::Input(format!("{}: {e}", input.display())))?;
    let report = Report::from_json(&text)?;
    let format = c
        .format
        .clone()
        .or_else(|| {
            c.output
                .as_ref()
                .and_then(|p| p.extension())
                .map(|e| e.to_string_lossy().into_owned())
        })
        .unwrap_or_else(|| "md".into());
    let bytes = match format.as_str() {
        "json" => report.to_json()?.into_bytes(),
        "csv" => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            buf
        }
        "md" | "markdown" => report.to_markdown().into_bytes(),
        other => return Err(CliError::Usage(format!("unknown report format `{other}`"))),
    };
    match &c.output {
        Some(p) => write_file(p, &bytes),
        None => {
            std::io::stdout().write_all(&bytes)?;
            Ok(())
        }
    }
}
