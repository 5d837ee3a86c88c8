use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::netlist::{Gate, GateType, Netlist};
use crate::sim::check_equivalence;

/// Variable slot inside a pattern; equal slots must bind equal nets.
pub type Var = usize;

/// Inputs of a matched driver gate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DriverInputs {
    /// Exactly these inputs, in this order.
    Vars(Vec<Var>),
    /// Any number of inputs, captured as a list.
    All,
}

/// What a root input must look like.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Operand {
    /// Any net.
    Net(Var),
    /// A net driven by a gate of the given type.
    Driven { kind: GateType, inputs: DriverInputs },
    /// A net that is constant by construction: `XOR(x, x)` is 0 and
    /// `XNOR(x, x)` is 1. The constant net itself is bound to the slot.
    Const { value: bool, var: Var },
}

/// The gate shape a rule looks for, anchored at a root gate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern {
    pub root: GateType,
    pub operands: Vec<Operand>,
    /// Minimum number of extra root inputs beyond the operands, or `None`
    /// when the root arity must equal the operand count.
    pub rest: Option<usize>,
    /// Matched driver gates may have consumers besides the root; they are
    /// then kept in place.
    pub shared: bool,
}

/// An input of a replacement gate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Arg {
    Var(Var),
    /// The extra root inputs, in their original order.
    Rest,
    /// The inputs captured by a [`DriverInputs::All`] operand.
    Inner,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Replacement {
    /// The root net is replaced by an existing net.
    Alias(Var),
    /// The root gate is replaced in place by a gate of this type.
    Gate { kind: GateType, args: Vec<Arg> },
}

/// A local, function-preserving rewrite.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewriteRule {
    pub id: String,
    pub pattern: Pattern,
    pub replacement: Replacement,
}

impl RewriteRule {
    /// Confirm by exhaustive simulation that the replacement computes the
    /// same function as the pattern for small instantiations.
    pub fn verify(&self) -> Result<()> {
        let rest_sizes: Vec<usize> = match self.pattern.rest {
            Some(min) => vec![min, min + 1],
            None => vec![0],
        };
        let inner_sizes: Vec<usize> = match self.all_kind() {
            Some(k) if k.is_unary() => vec![1],
            Some(_) => vec![2, 3],
            None => vec![0],
        };
        for &rest in &rest_sizes {
            for &inner in &inner_sizes {
                let (pattern, replaced) = self.instantiate(rest, inner)?;
                let report = check_equivalence(&pattern, &replaced, 0)?;
                if !report.equivalent {
                    return Err(Error::Invalid(format!(
                        "rule `{}` changes the function (rest {rest}, inner {inner})",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }

    fn all_kind(&self) -> Option<GateType> {
        self.pattern.operands.iter().find_map(|op| match op {
            Operand::Driven {
                kind,
                inputs: DriverInputs::All,
            } => Some(*kind),
            _ => None,
        })
    }

    /// Build the pattern as a one-output netlist and the same netlist with
    /// the root rewritten.
    fn instantiate(&self, rest: usize, inner: usize) -> Result<(Netlist, Netlist)> {
        let var = |v: Var| format!("v{v}");
        let mut inputs: Vec<String> = Vec::new();
        let add_input = |name: String, inputs: &mut Vec<String>| {
            if !inputs.contains(&name) {
                inputs.push(name);
            }
        };
        let mut gates: BTreeMap<String, Gate> = BTreeMap::new();
        let mut root_inputs = Vec::new();
        let mut bound: BTreeMap<Var, String> = BTreeMap::new();
        let mut inner_nets = Vec::new();
        for (i, op) in self.pattern.operands.iter().enumerate() {
            match op {
                Operand::Net(v) => {
                    add_input(var(*v), &mut inputs);
                    bound.insert(*v, var(*v));
                    root_inputs.push(var(*v));
                }
                Operand::Driven { kind, inputs: di } => {
                    let ins: Vec<String> = match di {
                        DriverInputs::Vars(vs) => vs.iter().map(|&v| var(v)).collect(),
                        DriverInputs::All => {
                            let nets: Vec<String> = (0..inner).map(|j| format!("w{j}")).collect();
                            inner_nets = nets.clone();
                            nets
                        }
                    };
                    for name in &ins {
                        add_input(name.clone(), &mut inputs);
                    }
                    if let DriverInputs::Vars(vs) = di {
                        for &v in vs {
                            bound.insert(v, var(v));
                        }
                    }
                    let id = format!("d{i}");
                    gates.insert(id.clone(), Gate::new(*kind, ins));
                    root_inputs.push(id);
                }
                Operand::Const { value, var: v } => {
                    add_input("c".to_string(), &mut inputs);
                    let kind = if *value { GateType::Xnor } else { GateType::Xor };
                    let id = var(*v);
                    gates.insert(id.clone(), Gate::new(kind, vec!["c".into(), "c".into()]));
                    bound.insert(*v, id.clone());
                    root_inputs.push(id);
                }
            }
        }
        let rest_nets: Vec<String> = (0..rest).map(|j| format!("r{j}")).collect();
        for r in &rest_nets {
            add_input(r.clone(), &mut inputs);
        }
        root_inputs.extend(rest_nets.iter().cloned());

        let mut pattern_gates = gates.clone();
        pattern_gates.insert("y".into(), Gate::new(self.pattern.root, root_inputs));
        let pattern = Netlist::new(inputs.clone(), vec![], vec!["y".into()], pattern_gates)?;

        let root = match &self.replacement {
            Replacement::Alias(v) => Gate::new(GateType::Buff, vec![bound[v].clone()]),
            Replacement::Gate { kind, args } => {
                let mut ins = Vec::new();
                for a in args {
                    match a {
                        Arg::Var(v) => ins.push(bound[v].clone()),
                        Arg::Rest => ins.extend(rest_nets.iter().cloned()),
                        Arg::Inner => ins.extend(inner_nets.iter().cloned()),
                    }
                }
                collapse(*kind, ins)
            }
        };
        gates.insert("y".into(), root);
        let replaced = Netlist::new(inputs, vec![], vec!["y".into()], gates)?;
        Ok((pattern, replaced))
    }
}

/// A multi-input type applied to a single net degenerates to a buffer or an
/// inverter.
pub(crate) fn collapse(kind: GateType, inputs: Vec<String>) -> Gate {
    if inputs.len() == 1 && !kind.is_unary() {
        let unary = if kind.is_inverting() {
            GateType::Not
        } else {
            GateType::Buff
        };
        Gate::new(unary, inputs)
    } else {
        Gate::new(kind, inputs)
    }
}

fn rule(id: &str, pattern: Pattern, replacement: Replacement) -> RewriteRule {
    RewriteRule {
        id: id.to_string(),
        pattern,
        replacement,
    }
}

fn not_of(v: Var) -> Operand {
    Operand::Driven {
        kind: GateType::Not,
        inputs: DriverInputs::Vars(vec![v]),
    }
}

fn all_of(kind: GateType) -> Operand {
    Operand::Driven {
        kind,
        inputs: DriverInputs::All,
    }
}

/// The built-in rule library in priority order.
///
/// Each rule is checked by exhaustive simulation before the list is returned.
/// Every rule either removes a gate, lowers total fan-in, or removes an
/// inverter feeding a parity gate, so repeated application terminates.
pub fn builtin_rules() -> Vec<RewriteRule> {
    use GateType::*;
    let mut rules = vec![
        rule(
            "buff-elim",
            Pattern {
                root: Buff,
                operands: vec![Operand::Net(0)],
                rest: None,
                shared: false,
            },
            Replacement::Alias(0),
        ),
        rule(
            "double-not",
            Pattern {
                root: Not,
                operands: vec![not_of(0)],
                rest: None,
                shared: true,
            },
            Replacement::Alias(0),
        ),
    ];
    for kind in [Xor, Xnor] {
        rules.push(rule(
            &format!("{}-dup-input", kind.name().to_lowercase()),
            Pattern {
                root: kind,
                operands: vec![Operand::Net(0), Operand::Net(0)],
                rest: Some(1),
                shared: false,
            },
            Replacement::Gate {
                kind,
                args: vec![Arg::Rest],
            },
        ));
    }
    for kind in [And, Nand, Or, Nor, Xor, Xnor] {
        for value in [false, true] {
            let keep = Replacement::Gate {
                kind,
                args: vec![Arg::Rest],
            };
            let replacement = match (kind, value) {
                (And, false) | (Or, true) => Replacement::Alias(0),
                (Nand, false) | (Nor, true) => Replacement::Gate {
                    kind: Not,
                    args: vec![Arg::Var(0)],
                },
                (Xor, true) | (Xnor, true) => Replacement::Gate {
                    kind: kind.complement(),
                    args: vec![Arg::Rest],
                },
                _ => keep,
            };
            rules.push(rule(
                &format!("{}-const{}", kind.name().to_lowercase(), value as u8),
                Pattern {
                    root: kind,
                    operands: vec![Operand::Const { value, var: 0 }],
                    rest: Some(1),
                    shared: true,
                },
                replacement,
            ));
        }
    }
    for kind in [Xor, Xnor] {
        rules.push(rule(
            &format!("not-{}-fuse", kind.name().to_lowercase()),
            Pattern {
                root: Not,
                operands: vec![all_of(kind)],
                rest: None,
                shared: false,
            },
            Replacement::Gate {
                kind: kind.complement(),
                args: vec![Arg::Inner],
            },
        ));
    }
    for (name, shared) in [("absorb-not", false), ("push-shared-not", true)] {
        for kind in [Xor, Xnor] {
            rules.push(rule(
                &format!("{}-{name}", kind.name().to_lowercase()),
                Pattern {
                    root: kind,
                    operands: vec![not_of(0)],
                    rest: Some(1),
                    shared,
                },
                Replacement::Gate {
                    kind: kind.complement(),
                    args: vec![Arg::Var(0), Arg::Rest],
                },
            ));
        }
    }
    for kind in [And, Or, Nand, Nor] {
        rules.push(rule(
            &format!("not-{}-fuse", kind.name().to_lowercase()),
            Pattern {
                root: Not,
                operands: vec![all_of(kind)],
                rest: None,
                shared: false,
            },
            Replacement::Gate {
                kind: kind.complement(),
                args: vec![Arg::Inner],
            },
        ));
    }
    for (kind, to) in [(And, Nor), (Or, Nand), (Nand, Or), (Nor, And)] {
        rules.push(rule(
            &format!("{}-demorgan", kind.name().to_lowercase()),
            Pattern {
                root: kind,
                operands: vec![not_of(0), not_of(1)],
                rest: None,
                shared: false,
            },
            Replacement::Gate {
                kind: to,
                args: vec![Arg::Var(0), Arg::Var(1)],
            },
        ));
    }
    for r in &rules {
        if let Err(e) = r.verify() {
            panic!("built-in rule library is unsound: {e}");
        }
    }
    rules
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_rules_are_sound() {
        let rules = builtin_rules();
        for r in &rules {
            r.verify().unwrap_or_else(|e| panic!("{}: {e}", r.id));
        }
        let mut ids: Vec<&str> = rules.iter().map(|r| r.id.as_str()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), rules.len());
    }

    #[test]
    fn unsound_rule_rejected() {
        let bad = rule(
            "bad",
            Pattern {
                root: GateType::Not,
                operands: vec![all_of(GateType::And)],
                rest: None,
                shared: false,
            },
            Replacement::Gate {
                kind: GateType::Or,
                args: vec![Arg::Inner],
            },
        );
        assert!(bad.verify().is_err());
    }

    #[test]
    fn collapse_single_input() {
        assert_eq!(collapse(GateType::Xnor, vec!["a".into()]).kind, GateType::Not);
        assert_eq!(collapse(GateType::And, vec!["a".into()]).kind, GateType::Buff);
        assert_eq!(collapse(GateType::And, vec!["a".into(), "b".into()]).kind, GateType::And);
    }
}
