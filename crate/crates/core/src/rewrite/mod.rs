//! Deterministic re-synthesis by local rewriting.
//!
//! Gates are visited in topological order and each root is rewritten with the
//! first applicable rule until nothing applies. Passes repeat until a fixpoint
//! or the pass limit. Every application is logged so the run can be replayed.

mod classify;
mod rules;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netlist::{topo_sort, Gate, Netlist};

pub use classify::{
    classify_change, classify_with, enumerate_transformations, ChangeLevel, TransformationGroup,
    TransformationTable,
};
pub use rules::{
    builtin_rules, Arg, DriverInputs, Operand, Pattern, Replacement, RewriteRule, Var,
};

use rules::collapse;

/// Pass limit used when none is given.
pub const DEFAULT_MAX_PASSES: usize = 10;

/// One rule application.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteEntry {
    pub rule: String,
    pub root: String,
    /// The root followed by matched driver gates.
    pub matched: Vec<String>,
    /// Gates present after the rewrite that the rewrite wrote.
    pub produced: Vec<String>,
    pub pass: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteLog {
    pub entries: Vec<RewriteEntry>,
}

impl RewriteLog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Whether `gate` took part in any rewrite as root or matched driver.
    pub fn touches(&self, gate: &str) -> bool {
        self.entries
            .iter()
            .any(|e| e.matched.iter().any(|m| m == gate))
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.entries {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads entries, skipping blank lines and `#` comment lines.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<RewriteLog> {
        let mut entries = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            entries.push(serde_json::from_str(&line)?);
        }
        Ok(RewriteLog { entries })
    }
}

/// Result of [`resynthesize`].
#[derive(Clone, Debug)]
pub struct Resynthesis {
    pub netlist: Netlist,
    pub log: RewriteLog,
    pub passes: usize,
    /// False when the pass limit was hit while rules still applied.
    pub converged: bool,
}

/// Rewrite `n` with `rules` until no rule applies or `max_passes` passes ran.
///
/// Key inputs are ordinary nets here. The output is functionally equivalent
/// to the input for every key.
pub fn resynthesize(n: &Netlist, rules: &[RewriteRule], max_passes: usize) -> Result<Resynthesis> {
    let mut work = Work::new(n);
    let mut log = RewriteLog::default();
    let mut passes = 0;
    let mut converged = false;
    while passes < max_passes {
        passes += 1;
        let mut changed = false;
        for id in topo_sort(&work.gates)? {
            while work.gates.contains_key(&id) {
                let Some((rule, m)) = rules
                    .iter()
                    .find_map(|r| work.find_match(r, &id).map(|m| (r, m)))
                else {
                    break;
                };
                let entry = work.apply(rule, &id, m, passes);
                let deleted = entry.produced.is_empty();
                log.entries.push(entry);
                changed = true;
                if deleted {
                    break;
                }
            }
        }
        if !changed {
            converged = true;
            break;
        }
    }
    if !converged && passes == max_passes {
        // A last scan tells a fixpoint reached on the final pass apart from
        // a genuine cutoff.
        converged = !work
            .gates
            .keys()
            .any(|id| rules.iter().any(|r| work.find_match(r, id).is_some()));
    }
    let netlist = work.finish()?;
    Ok(Resynthesis {
        netlist,
        log,
        passes,
        converged,
    })
}

/// Re-apply a logged run to `n`; every entry must match the same gates.
pub fn replay(n: &Netlist, log: &RewriteLog, rules: &[RewriteRule]) -> Result<Netlist> {
    let by_id: HashMap<&str, &RewriteRule> = rules.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut work = Work::new(n);
    for (i, e) in log.entries.iter().enumerate() {
        let rule = by_id
            .get(e.rule.as_str())
            .ok_or(Error::ReplayDiverged(i))?;
        let m = work
            .find_match(rule, &e.root)
            .ok_or(Error::ReplayDiverged(i))?;
        let entry = work.apply(rule, &e.root, m, e.pass);
        if entry.matched != e.matched || entry.produced != e.produced {
            return Err(Error::ReplayDiverged(i));
        }
    }
    work.finish()
}

struct Match {
    vars: BTreeMap<Var, String>,
    rest: Vec<String>,
    inner: Vec<String>,
    drivers: Vec<String>,
}

/// Mutable netlist with consumer bookkeeping.
struct Work {
    pis: Vec<String>,
    keys: Vec<String>,
    pos: Vec<String>,
    po_set: BTreeSet<String>,
    gates: BTreeMap<String, Gate>,
    consumers: HashMap<String, BTreeSet<String>>,
}

impl Work {
    fn new(n: &Netlist) -> Self {
        let (pis, keys, pos, gates) = n.clone().into_parts();
        let mut consumers: HashMap<String, BTreeSet<String>> = HashMap::new();
        for (id, g) in &gates {
            for i in &g.inputs {
                consumers.entry(i.clone()).or_default().insert(id.clone());
            }
        }
        let po_set = pos.iter().cloned().collect();
        Work {
            pis,
            keys,
            pos,
            po_set,
            gates,
            consumers,
        }
    }

    fn finish(self) -> Result<Netlist> {
        Netlist::new(self.pis, self.keys, self.pos, self.gates)
    }

    fn consumer_count(&self, net: &str) -> usize {
        self.consumers.get(net).map_or(0, BTreeSet::len)
    }

    fn set_gate(&mut self, id: &str, gate: Gate) {
        self.remove_gate(id);
        for i in &gate.inputs {
            self.consumers
                .entry(i.clone())
                .or_default()
                .insert(id.to_string());
        }
        self.gates.insert(id.to_string(), gate);
    }

    fn remove_gate(&mut self, id: &str) {
        if let Some(old) = self.gates.remove(id) {
            for i in &old.inputs {
                if let Some(set) = self.consumers.get_mut(i) {
                    set.remove(id);
                }
            }
        }
    }

    fn find_match(&self, rule: &RewriteRule, root: &str) -> Option<Match> {
        let gate = self.gates.get(root)?;
        let p = &rule.pattern;
        if gate.kind != p.root {
            return None;
        }
        let arity = gate.inputs.len();
        match p.rest {
            None if arity != p.operands.len() => return None,
            Some(min) if arity < p.operands.len() + min => return None,
            _ => {}
        }
        let mut m = Match {
            vars: BTreeMap::new(),
            rest: Vec::new(),
            inner: Vec::new(),
            drivers: Vec::new(),
        };
        let mut used = vec![false; arity];
        if !self.assign(rule, root, &gate.inputs, 0, &mut used, &mut m) {
            return None;
        }
        m.rest = gate
            .inputs
            .iter()
            .zip(&used)
            .filter(|(_, &u)| !u)
            .map(|(n, _)| n.clone())
            .collect();
        let replacement = self.build(rule, root, &m);
        if replacement.as_ref() == Some(gate) {
            return None;
        }
        Some(m)
    }

    /// Backtracking assignment of operands to distinct root input positions;
    /// the first assignment in position order wins.
    fn assign(
        &self,
        rule: &RewriteRule,
        root: &str,
        inputs: &[String],
        k: usize,
        used: &mut [bool],
        m: &mut Match,
    ) -> bool {
        let Some(op) = rule.pattern.operands.get(k) else {
            return true;
        };
        for pos in 0..inputs.len() {
            if used[pos] {
                continue;
            }
            let saved = (m.vars.clone(), m.inner.len(), m.drivers.len());
            if self.match_operand(rule, root, op, &inputs[pos], m) {
                used[pos] = true;
                if self.assign(rule, root, inputs, k + 1, used, m) {
                    return true;
                }
                used[pos] = false;
            }
            m.vars = saved.0;
            m.inner.truncate(saved.1);
            m.drivers.truncate(saved.2);
        }
        false
    }

    fn bind(m: &mut Match, v: Var, net: &str) -> bool {
        match m.vars.get(&v) {
            Some(b) => b == net,
            None => {
                m.vars.insert(v, net.to_string());
                true
            }
        }
    }

    fn match_operand(
        &self,
        rule: &RewriteRule,
        root: &str,
        op: &Operand,
        net: &str,
        m: &mut Match,
    ) -> bool {
        match op {
            Operand::Net(v) => Self::bind(m, *v, net),
            Operand::Driven { kind, inputs } => {
                let Some(d) = self.gates.get(net) else {
                    return false;
                };
                if d.kind != *kind {
                    return false;
                }
                if !rule.pattern.shared {
                    let only_root = self
                        .consumers
                        .get(net)
                        .is_some_and(|c| c.len() == 1 && c.contains(root));
                    if !only_root || self.po_set.contains(net) {
                        return false;
                    }
                }
                match inputs {
                    DriverInputs::Vars(vs) => {
                        if vs.len() != d.inputs.len() {
                            return false;
                        }
                        for (v, n) in vs.iter().zip(&d.inputs) {
                            if !Self::bind(m, *v, n) {
                                return false;
                            }
                        }
                    }
                    DriverInputs::All => m.inner.extend(d.inputs.iter().cloned()),
                }
                if !m.drivers.iter().any(|x| x == net) {
                    m.drivers.push(net.to_string());
                }
                true
            }
            Operand::Const { value, var } => {
                let Some(d) = self.gates.get(net) else {
                    return false;
                };
                let expected = if *value {
                    crate::netlist::GateType::Xnor
                } else {
                    crate::netlist::GateType::Xor
                };
                if d.kind != expected || d.inputs.len() != 2 || d.inputs[0] != d.inputs[1] {
                    return false;
                }
                Self::bind(m, *var, net)
            }
        }
    }

    /// The gate the root becomes, or `None` when the root net is aliased away.
    fn build(&self, rule: &RewriteRule, root: &str, m: &Match) -> Option<Gate> {
        match &rule.replacement {
            Replacement::Alias(v) => {
                if self.po_set.contains(root) {
                    Some(Gate::new(
                        crate::netlist::GateType::Buff,
                        vec![m.vars[v].clone()],
                    ))
                } else {
                    None
                }
            }
            Replacement::Gate { kind, args } => {
                let mut ins = Vec::new();
                for a in args {
                    match a {
                        Arg::Var(v) => ins.push(m.vars[v].clone()),
                        Arg::Rest => ins.extend(m.rest.iter().cloned()),
                        Arg::Inner => ins.extend(m.inner.iter().cloned()),
                    }
                }
                Some(collapse(*kind, ins))
            }
        }
    }

    fn apply(&mut self, rule: &RewriteRule, root: &str, m: Match, pass: usize) -> RewriteEntry {
        let mut matched = vec![root.to_string()];
        matched.extend(m.drivers.iter().cloned());
        let mut orphans: Vec<String> = self.gates[root].inputs.clone();
        let produced = match self.build(rule, root, &m) {
            Some(gate) => {
                self.set_gate(root, gate);
                vec![root.to_string()]
            }
            None => {
                let Replacement::Alias(v) = &rule.replacement else {
                    unreachable!("only aliases delete the root")
                };
                let target = m.vars[v].clone();
                let consumers: Vec<String> = self
                    .consumers
                    .get(root)
                    .map(|c| c.iter().cloned().collect())
                    .unwrap_or_default();
                for c in consumers {
                    let mut g = self.gates[&c].clone();
                    for i in g.inputs.iter_mut() {
                        if i == root {
                            *i = target.clone();
                        }
                    }
                    self.set_gate(&c, g);
                }
                self.remove_gate(root);
                Vec::new()
            }
        };
        // Sweep logic left without consumers.
        while let Some(net) = orphans.pop() {
            if self.consumer_count(&net) > 0 || self.po_set.contains(&net) {
                continue;
            }
            if let Some(g) = self.gates.get(&net) {
                orphans.extend(g.inputs.iter().cloned());
                self.remove_gate(&net);
            }
        }
        RewriteEntry {
            rule: rule.id.clone(),
            root: root.to_string(),
            matched,
            produced,
            pass,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{parse_bench, GateType};
    use crate::sim::{check_equivalence, check_equivalence_keyed};

    fn run(text: &str) -> Resynthesis {
        let n = parse_bench(text).unwrap();
        let out = resynthesize(&n, &builtin_rules(), DEFAULT_MAX_PASSES).unwrap();
        if n.key_inputs().is_empty() {
            assert!(check_equivalence(&n, &out.netlist, 0).unwrap().equivalent);
        } else {
            assert!(check_equivalence_keyed(&n, &out.netlist, 0).unwrap().equivalent);
        }
        out
    }

    #[test]
    fn xor_followed_by_not_fuses() {
        let out = run("INPUT(a)\nINPUT(keyinput0)\nOUTPUT(y)\n\
             x = XOR(a, keyinput0)\nyn = NOT(x)\ny = AND(yn, a)");
        let g = out.netlist.gate("yn").unwrap();
        assert_eq!(g.kind, GateType::Xnor);
        assert!(out.netlist.gate("x").is_none());
        assert!(out.converged);
        assert_eq!(out.log.entries[0].rule, "not-xor-fuse");
        assert_eq!(out.log.entries[0].matched, vec!["yn", "x"]);
        assert_eq!(out.log.entries[0].produced, vec!["yn"]);
    }

    #[test]
    fn double_inverter_removed() {
        let out = run("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nn1 = NOT(a)\nn2 = NOT(n1)\ny = AND(n2, b)");
        assert_eq!(out.netlist.gate_count(), 1);
        assert_eq!(out.netlist.gate("y").unwrap().inputs, vec!["a", "b"]);
    }

    #[test]
    fn output_root_becomes_buffer() {
        let out = run("INPUT(a)\nOUTPUT(y)\nn1 = NOT(a)\ny = NOT(n1)");
        let g = out.netlist.gate("y").unwrap();
        assert_eq!(g.kind, GateType::Buff);
        assert_eq!(g.inputs, vec!["a"]);
        assert!(out.converged);
    }

    #[test]
    fn shared_inverter_kept_when_pushed() {
        let out = run("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nOUTPUT(z)\n\
             n = NOT(a)\ny = XOR(n, b)\nz = AND(n, b)");
        assert_eq!(out.netlist.gate("y").unwrap().kind, GateType::Xnor);
        assert_eq!(out.netlist.gate("y").unwrap().inputs, vec!["a", "b"]);
        assert!(out.netlist.gate("n").is_some());
    }

    #[test]
    fn demorgan_and_constants() {
        let out = run("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nna = NOT(a)\nnb = NOT(b)\ny = AND(na, nb)");
        assert_eq!(out.netlist.gate("y").unwrap().kind, GateType::Nor);
        assert_eq!(out.netlist.gate_count(), 1);
        let out = run("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nOUTPUT(z)\nz = XOR(a, a)\ny = OR(z, b)");
        assert_eq!(out.netlist.gate("y").unwrap().kind, GateType::Buff);
    }

    #[test]
    fn dup_inputs_collapse() {
        let out = run("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = XNOR(a, b, a)");
        let g = out.netlist.gate("y").unwrap();
        assert_eq!(g.kind, GateType::Not);
        assert_eq!(g.inputs, vec!["b"]);
    }

    #[test]
    fn fixpoint_is_stable() {
        let text = "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\n\
             n1 = NOT(a)\nn2 = NOT(n1)\nx = XOR(n2, b)\nnx = NOT(x)\nm = AND(nx, c)\ny = NOT(m)";
        let once = run(text);
        let twice = resynthesize(&once.netlist, &builtin_rules(), DEFAULT_MAX_PASSES).unwrap();
        assert!(twice.log.is_empty());
        assert_eq!(twice.netlist, once.netlist);
        let again = run(text);
        assert_eq!(again.log, once.log);
    }

    #[test]
    fn pass_limit_flagged() {
        // `x` only becomes single-fanout after `q` is rewritten, which happens
        // after `p` was visited, so a second pass is needed.
        let text = "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(p)\nOUTPUT(q)\n\
             x = AND(a, b)\nk = XOR(c, c)\np = NOT(x)\nq = AND(x, k)";
        let n = parse_bench(text).unwrap();
        let cut = resynthesize(&n, &builtin_rules(), 1).unwrap();
        assert_eq!(cut.passes, 1);
        assert!(!cut.converged);
        assert!(check_equivalence(&n, &cut.netlist, 0).unwrap().equivalent);
        let full = run(text);
        assert!(full.converged);
        assert_eq!(full.netlist.gate("p").unwrap().kind, GateType::Nand);
    }

    #[test]
    fn log_round_trip_and_replay() {
        let text = "INPUT(a)\nINPUT(b)\nINPUT(keyinput0)\nOUTPUT(y)\n\
             x = XOR(a, keyinput0)\nxn = NOT(x)\nb1 = BUFF(b)\ny = NAND(xn, b1)";
        let n = parse_bench(text).unwrap();
        let out = resynthesize(&n, &builtin_rules(), DEFAULT_MAX_PASSES).unwrap();
        let mut buf = Vec::new();
        out.log.write_jsonl(&mut buf).unwrap();
        let back = RewriteLog::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, out.log);
        let replayed = replay(&n, &back, &builtin_rules()).unwrap();
        assert_eq!(replayed, out.netlist);

        let mut broken = back.clone();
        broken.entries[0].root = "y".into();
        assert!(matches!(
            replay(&n, &broken, &builtin_rules()),
            Err(Error::ReplayDiverged(0))
        ));
    }
}
