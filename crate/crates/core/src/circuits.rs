//! Generators for the bundled benchmark circuits.
//!
//! Apart from `c17`, the circuits are built from arithmetic and coding
//! structures and then given a seeded "texture": buffers on some nets,
//! inverting gates split into a base gate plus inverter, and inverter pairs.
//! Unoptimised netlists carry exactly this kind of slack, and it is what the
//! rewriter removes after locking.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::netlist::{Gate, GateType, Netlist, NetlistBuilder};

/// Names of the bundled circuits, smallest first.
pub const NAMES: [&str; 8] = [
    "c17", "prio16", "add16", "alu8", "sec32", "mult8", "sec32n", "mult16",
];

/// The `.bench` sources committed with the crate.
pub const BENCH_SOURCES: [(&str, &str); 8] = [
    ("c17", include_str!("../circuits/c17.bench")),
    ("prio16", include_str!("../circuits/prio16.bench")),
    ("add16", include_str!("../circuits/add16.bench")),
    ("alu8", include_str!("../circuits/alu8.bench")),
    ("sec32", include_str!("../circuits/sec32.bench")),
    ("mult8", include_str!("../circuits/mult8.bench")),
    ("sec32n", include_str!("../circuits/sec32n.bench")),
    ("mult16", include_str!("../circuits/mult16.bench")),
];

/// Generate a bundled circuit by name.
pub fn generate(name: &str) -> Option<Netlist> {
    let n = match name {
        "c17" => c17(),
        "prio16" => textured(priority(16), 11, 0.15),
        "add16" => textured(adder(16), 12, 0.15),
        "alu8" => textured(alu(8), 13, 0.15),
        "sec32" => textured(sec(32, false), 14, 0.15),
        "mult8" => textured(multiplier(8), 15, 0.12),
        "sec32n" => textured(sec(32, true), 16, 0.10),
        "mult16" => textured(multiplier(16), 17, 0.10),
        _ => return None,
    };
    Some(n.expect("generators build valid netlists"))
}

/// Parse the committed source of a bundled circuit.
pub fn load(name: &str) -> Option<Result<Netlist>> {
    BENCH_SOURCES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, src)| crate::netlist::parse_bench(src))
}

struct Circ {
    b: NetlistBuilder,
    count: usize,
    nand_xor: bool,
}

impl Circ {
    fn new() -> Self {
        Circ {
            b: NetlistBuilder::new(),
            count: 0,
            nand_xor: false,
        }
    }

    fn inputs(&mut self, prefix: &str, n: usize) -> Vec<String> {
        (0..n)
            .map(|i| {
                let name = format!("{prefix}{i}");
                self.b.input(name.clone());
                name
            })
            .collect()
    }

    fn gate(&mut self, kind: GateType, ins: &[&str]) -> String {
        self.count += 1;
        let id = format!("N{}", self.count);
        self.b.gate(id.clone(), kind, ins.iter().copied());
        id
    }

    fn not(&mut self, a: &str) -> String {
        self.gate(GateType::Not, &[a])
    }

    fn and(&mut self, a: &str, b: &str) -> String {
        self.gate(GateType::And, &[a, b])
    }

    fn or(&mut self, a: &str, b: &str) -> String {
        self.gate(GateType::Or, &[a, b])
    }

    fn xor(&mut self, a: &str, b: &str) -> String {
        if self.nand_xor {
            let t = self.gate(GateType::Nand, &[a, b]);
            let u = self.gate(GateType::Nand, &[a, &t]);
            let v = self.gate(GateType::Nand, &[b, &t]);
            self.gate(GateType::Nand, &[&u, &v])
        } else {
            self.gate(GateType::Xor, &[a, b])
        }
    }

    /// Balanced tree of `kind` with at most `width` inputs per gate.
    fn tree(&mut self, kind: GateType, nets: &[String], width: usize) -> String {
        let mut level: Vec<String> = nets.to_vec();
        while level.len() > 1 {
            level = level
                .chunks(width)
                .map(|c| {
                    if c.len() == 1 {
                        c[0].clone()
                    } else if kind == GateType::Xor {
                        let mut acc = c[0].clone();
                        for x in &c[1..] {
                            acc = self.xor(&acc, x);
                        }
                        acc
                    } else {
                        let refs: Vec<&str> = c.iter().map(String::as_str).collect();
                        self.gate(kind, &refs)
                    }
                })
                .collect();
        }
        level.pop().expect("nonempty tree")
    }

    fn full_adder(&mut self, a: &str, b: &str, c: &str) -> (String, String) {
        let p = self.xor(a, b);
        let s = self.xor(&p, c);
        let g1 = self.and(a, b);
        let g2 = self.and(&p, c);
        (s, self.or(&g1, &g2))
    }

    fn half_adder(&mut self, a: &str, b: &str) -> (String, String) {
        (self.xor(a, b), self.and(a, b))
    }

    /// Ripple sum of `x` (missing bits are zero) and `y`; returns the sum
    /// bits and the carry out.
    fn ripple(&mut self, x: &[Option<String>], y: &[String], cin: Option<&str>) -> (Vec<String>, String) {
        let mut carry: Option<String> = cin.map(str::to_string);
        let mut sum = Vec::with_capacity(y.len());
        for (k, yk) in y.iter().enumerate() {
            let xk = x.get(k).cloned().flatten();
            let (s, c) = match (xk, carry.take()) {
                (Some(a), Some(c)) => self.full_adder(&a, yk, &c),
                (Some(a), None) => self.half_adder(&a, yk),
                (None, Some(c)) => self.half_adder(yk, &c),
                (None, None) => {
                    sum.push(yk.clone());
                    continue;
                }
            };
            sum.push(s);
            carry = Some(c);
        }
        (sum, carry.expect("the lowest bit always produces a carry"))
    }

    /// Build with the output gates renamed `<prefix><i>`.
    fn finish(self, outputs: &[String], prefix: &str) -> Result<Netlist> {
        let mut b = self.b;
        for o in outputs {
            b.output(o.clone());
        }
        let names: BTreeMap<&str, String> = outputs
            .iter()
            .enumerate()
            .map(|(i, o)| (o.as_str(), format!("{prefix}{i}")))
            .collect();
        b.build()?
            .renamed(|n| names.get(n).cloned().unwrap_or_else(|| n.to_string()))
    }
}

/// The ISCAS-85 c17 circuit.
pub fn c17() -> Result<Netlist> {
    let mut b = NetlistBuilder::new();
    for i in ["1", "2", "3", "6", "7"] {
        b.input(i);
    }
    b.output("22").output("23");
    b.gate("10", GateType::Nand, ["1", "3"])
        .gate("11", GateType::Nand, ["3", "6"])
        .gate("16", GateType::Nand, ["2", "11"])
        .gate("19", GateType::Nand, ["11", "7"])
        .gate("22", GateType::Nand, ["10", "16"])
        .gate("23", GateType::Nand, ["16", "19"]);
    b.build()
}

/// Ripple-carry adder with carry in and out.
pub fn adder(bits: usize) -> Result<Netlist> {
    let mut c = Circ::new();
    let a = c.inputs("a", bits);
    let b = c.inputs("b", bits);
    let cin = c.inputs("cin", 1).pop().expect("one input");
    let x: Vec<Option<String>> = a.into_iter().map(Some).collect();
    let (mut out, carry) = c.ripple(&x, &b, Some(&cin));
    out.push(carry);
    c.finish(&out, "s")
}

/// Unsigned array multiplier.
pub fn multiplier(bits: usize) -> Result<Netlist> {
    let mut c = Circ::new();
    let a = c.inputs("a", bits);
    let b = c.inputs("b", bits);
    let pp: Vec<Vec<String>> = (0..bits)
        .map(|i| (0..bits).map(|j| c.and(&a[j], &b[i])).collect())
        .collect();
    let mut out = vec![pp[0][0].clone()];
    let mut acc: Vec<String> = pp[0].clone();
    let mut carry: Option<String> = None;
    for row in pp.iter().skip(1) {
        let mut upper: Vec<Option<String>> = acc[1..].iter().cloned().map(Some).collect();
        upper.push(carry.take());
        let (sum, cout) = c.ripple(&upper, row, None);
        out.push(sum[0].clone());
        acc = sum;
        carry = Some(cout);
    }
    out.extend(acc[1..].iter().cloned());
    out.push(carry.expect("at least two rows"));
    c.finish(&out, "p")
}

/// Single-error-correcting decoder for `data` bits with Hamming check bits.
/// With `nand_xor` every XOR is built from four NAND gates.
pub fn sec(data: usize, nand_xor: bool) -> Result<Netlist> {
    let mut c = Circ::new();
    c.nand_xor = nand_xor;
    let mut positions = Vec::new();
    let mut p = 1usize;
    while positions.len() < data {
        if !p.is_power_of_two() {
            positions.push(p);
        }
        p += 1;
    }
    let checks = usize::BITS as usize - positions[data - 1].leading_zeros() as usize;
    let d = c.inputs("d", data);
    let k = c.inputs("k", checks);
    let syndrome: Vec<String> = (0..checks)
        .map(|j| {
            let mut nets = vec![k[j].clone()];
            nets.extend(
                positions
                    .iter()
                    .zip(&d)
                    .filter(|(p, _)| *p >> j & 1 == 1)
                    .map(|(_, n)| n.clone()),
            );
            c.tree(GateType::Xor, &nets, 2)
        })
        .collect();
    let inverted: Vec<String> = syndrome.iter().map(|s| c.not(s)).collect();
    let out: Vec<String> = positions
        .iter()
        .zip(&d)
        .map(|(&p, dn)| {
            let lits: Vec<&str> = (0..checks)
                .map(|j| {
                    if p >> j & 1 == 1 {
                        syndrome[j].as_str()
                    } else {
                        inverted[j].as_str()
                    }
                })
                .collect();
            let flip = c.gate(GateType::And, &lits);
            c.xor(dn, &flip)
        })
        .collect();
    c.finish(&out, "q")
}

/// ALU computing add, and, or, xor selected by a two-bit opcode, with carry
/// out and a zero flag.
pub fn alu(bits: usize) -> Result<Netlist> {
    let mut c = Circ::new();
    let a = c.inputs("a", bits);
    let b = c.inputs("b", bits);
    let op = c.inputs("op", 2);
    let cin = c.inputs("cin", 1).pop().expect("one input");
    let x: Vec<Option<String>> = a.iter().cloned().map(Some).collect();
    let (sum, carry) = c.ripple(&x, &b, Some(&cin));
    let n0 = c.not(&op[0]);
    let n1 = c.not(&op[1]);
    let sel = [
        c.and(&n1, &n0),
        c.and(&n1, &op[0]),
        c.and(&op[1], &n0),
        c.and(&op[1], &op[0]),
    ];
    let mut out = Vec::new();
    for i in 0..bits {
        let land = c.and(&a[i], &b[i]);
        let lor = c.or(&a[i], &b[i]);
        let lxor = c.xor(&a[i], &b[i]);
        let terms: Vec<String> = [&sum[i], &land, &lor, &lxor]
            .iter()
            .zip(&sel)
            .map(|(v, s)| c.and(v, s))
            .collect();
        let refs: Vec<&str> = terms.iter().map(String::as_str).collect();
        out.push(c.gate(GateType::Or, &refs));
    }
    let any = c.tree(GateType::Or, &out, 4);
    let zero = c.not(&any);
    let carry_out = c.and(&carry, &sel[0]);
    out.push(carry_out);
    out.push(zero);
    c.finish(&out, "y")
}

/// Priority encoder: the highest active request wins when enabled.
/// Outputs the one-hot grants, the binary index and a valid flag.
pub fn priority(lines: usize) -> Result<Netlist> {
    let mut c = Circ::new();
    let r = c.inputs("r", lines);
    let en = c.inputs("en", 1).pop().expect("one input");
    // above[i]: some request with a higher index is active.
    let mut above: Vec<Option<String>> = vec![None; lines];
    for i in (0..lines - 1).rev() {
        above[i] = Some(match &above[i + 1] {
            Some(x) => c.or(&r[i + 1], x),
            None => r[i + 1].clone(),
        });
    }
    let grants: Vec<String> = (0..lines)
        .map(|i| match &above[i] {
            Some(x) => {
                let free = c.not(x);
                c.gate(GateType::And, &[&r[i], &free, &en])
            }
            None => c.gate(GateType::And, &[&r[i], &en]),
        })
        .collect();
    let width = usize::BITS as usize - (lines - 1).leading_zeros() as usize;
    let mut out = grants.clone();
    for bit in 0..width {
        let sel: Vec<String> = grants
            .iter()
            .enumerate()
            .filter(|(i, _)| i >> bit & 1 == 1)
            .map(|(_, g)| g.clone())
            .collect();
        out.push(c.tree(GateType::Or, &sel, 4));
    }
    let any = c.tree(GateType::Or, &r, 4);
    out.push(c.and(&any, &en));
    c.finish(&out, "g")
}

/// Add seeded function-preserving slack to roughly `rate` of the gates.
pub fn textured(n: Result<Netlist>, seed: u64, rate: f64) -> Result<Netlist> {
    let n = n?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (pis, keys, pos, gates) = n.clone().into_parts();
    let mut out: BTreeMap<String, Gate> = BTreeMap::new();
    for (id, g) in gates {
        if !rng.gen_bool(rate) {
            out.insert(id, g);
            continue;
        }
        let inner = format!("{id}_t");
        match rng.gen_range(0..3) {
            0 if matches!(
                g.kind,
                GateType::And | GateType::Or | GateType::Nand | GateType::Nor
            ) =>
            {
                out.insert(inner.clone(), Gate::new(g.kind.complement(), g.inputs));
                out.insert(id, Gate::new(GateType::Not, vec![inner]));
            }
            1 => {
                let mid = format!("{id}_u");
                out.insert(inner.clone(), Gate::new(g.kind, g.inputs));
                out.insert(mid.clone(), Gate::new(GateType::Not, vec![inner]));
                out.insert(id, Gate::new(GateType::Not, vec![mid]));
            }
            _ => {
                out.insert(inner.clone(), Gate::new(g.kind, g.inputs));
                out.insert(id, Gate::new(GateType::Buff, vec![inner]));
            }
        }
    }
    Netlist::new(pis, keys, pos, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{check_equivalence, evaluate, Assignment};

    fn word(out: &Assignment, names: &[String]) -> u64 {
        names
            .iter()
            .enumerate()
            .map(|(i, n)| (out[n] as u64) << i)
            .sum()
    }

    fn assign(pairs: &[(&str, usize, u64)]) -> Assignment {
        let mut a = Assignment::new();
        for &(prefix, bits, v) in pairs {
            for i in 0..bits {
                a.insert(format!("{prefix}{i}"), v >> i & 1 == 1);
            }
        }
        a
    }

    #[test]
    fn adder_adds() {
        let n = adder(4).unwrap();
        for (x, y, cin) in [(3u64, 5u64, 0u64), (15, 15, 1), (9, 6, 1)] {
            let out = evaluate(&n, &assign(&[("a", 4, x), ("b", 4, y), ("cin", 1, cin)])).unwrap();
            assert_eq!(word(&out, n.primary_outputs()), x + y + cin);
        }
    }

    #[test]
    fn multiplier_multiplies() {
        let n = multiplier(4).unwrap();
        for (x, y) in [(3u64, 5u64), (15, 15), (9, 0), (7, 11)] {
            let out = evaluate(&n, &assign(&[("a", 4, x), ("b", 4, y)])).unwrap();
            assert_eq!(word(&out, n.primary_outputs()), x * y);
        }
    }

    #[test]
    fn sec_corrects_single_errors() {
        let n = sec(8, false).unwrap();
        let nn = sec(8, true).unwrap();
        assert!(check_equivalence(&n, &nn, 0).unwrap().equivalent);
        // All-zero codeword with one data bit flipped decodes to zero.
        for flip in 0..8 {
            let out = evaluate(&n, &assign(&[("d", 8, 1 << flip), ("k", 4, 0)])).unwrap();
            assert_eq!(word(&out, n.primary_outputs()), 0);
        }
    }

    #[test]
    fn alu_ops() {
        let n = alu(4).unwrap();
        let cases = [(0u64, 0u64), (1, 0), (2, 0), (3, 0)];
        for (op, _) in cases {
            let (x, y) = (0b1010u64, 0b0110u64);
            let out = evaluate(&n, &assign(&[("a", 4, x), ("b", 4, y), ("op", 2, op), ("cin", 1, 0)])).unwrap();
            let value = word(&out, &n.primary_outputs()[..4]);
            let expected = match op {
                0 => (x + y) & 0xf,
                1 => x & y,
                2 => x | y,
                _ => x ^ y,
            };
            assert_eq!(value, expected, "op {op}");
        }
    }

    #[test]
    fn priority_picks_highest() {
        let n = priority(8).unwrap();
        let out = evaluate(&n, &assign(&[("r", 8, 0b0010_0110), ("en", 1, 1)])).unwrap();
        let outs = n.primary_outputs();
        assert_eq!(word(&out, &outs[..8]), 0b0010_0000);
        assert_eq!(word(&out, &outs[8..11]), 5);
        assert!(out[&outs[11]]);
    }

    #[test]
    fn texture_preserves_function() {
        let plain = multiplier(4).unwrap();
        let t = textured(Ok(plain.clone()), 3, 0.5).unwrap();
        assert!(t.gate_count() > plain.gate_count());
        assert!(check_equivalence(&plain, &t, 0).unwrap().equivalent);
    }

    #[test]
    fn committed_sources_match_generators() {
        for name in NAMES {
            let generated = generate(name).unwrap();
            let loaded = load(name).unwrap().unwrap();
            assert_eq!(loaded, generated, "{name}");
        }
    }
}
