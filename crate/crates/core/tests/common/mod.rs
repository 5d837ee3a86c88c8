#![allow(dead_code)]

use netlock::netlist::NetlistBuilder;
use netlock::{GateType, Netlist};
use proptest::prelude::*;

/// Raw recipe for a random DAG: per gate a type and input picks that index
/// into the nets defined before it.
#[derive(Clone, Debug)]
pub struct Recipe {
    pub inputs: usize,
    pub gates: Vec<(GateType, Vec<usize>)>,
    pub extra_outputs: Vec<usize>,
}

pub fn recipe(max_inputs: usize, max_gates: usize) -> impl Strategy<Value = Recipe> {
    (1..=max_inputs, 1..=max_gates).prop_flat_map(move |(inputs, gates)| {
        let gate = (
            prop::sample::select(GateType::ALL.to_vec()),
            prop::collection::vec(any::<prop::sample::Index>(), 1..=3),
        );
        (
            Just(inputs),
            prop::collection::vec(gate, gates),
            prop::collection::vec(any::<prop::sample::Index>(), 0..3),
        )
            .prop_map(|(inputs, raw, extra)| {
                let gates = raw
                    .into_iter()
                    .enumerate()
                    .map(|(i, (kind, picks))| {
                        let available = inputs + i;
                        let arity = if kind.is_unary() { 1 } else { picks.len().max(2) };
                        let picks = (0..arity)
                            .map(|j| picks[j % picks.len()].index(available))
                            .collect();
                        (kind, picks)
                    })
                    .collect::<Vec<_>>();
                let total = inputs + gates.len();
                Recipe {
                    inputs,
                    extra_outputs: extra.iter().map(|x| x.index(total)).collect(),
                    gates,
                }
            })
    })
}

impl Recipe {
    pub fn net(&self, i: usize) -> String {
        if i < self.inputs {
            format!("i{i}")
        } else {
            format!("g{}", i - self.inputs)
        }
    }

    /// Gates without consumers are outputs, plus the extra picks.
    pub fn build(&self) -> Netlist {
        let mut b = NetlistBuilder::new();
        for i in 0..self.inputs {
            b.input(self.net(i));
        }
        let total = self.inputs + self.gates.len();
        let mut consumed = vec![false; total];
        for (g, (kind, picks)) in self.gates.iter().enumerate() {
            for &p in picks {
                consumed[p] = true;
            }
            b.gate(self.net(self.inputs + g), *kind, picks.iter().map(|&p| self.net(p)));
        }
        let mut outputs: Vec<usize> = (self.inputs..total).filter(|&i| !consumed[i]).collect();
        outputs.extend(self.extra_outputs.iter().copied().filter(|&i| i >= self.inputs));
        outputs.sort_unstable();
        outputs.dedup();
        for o in outputs {
            b.output(self.net(o));
        }
        b.build().expect("recipe builds a valid netlist")
    }
}

pub fn netlist(max_inputs: usize, max_gates: usize) -> impl Strategy<Value = Netlist> {
    recipe(max_inputs, max_gates).prop_map(|r| r.build())
}
