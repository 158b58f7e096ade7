use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{flat, Simulator, Trace};
use crate::error::{Error, Result};
use crate::library::CellLibrary;
use crate::netlist::{Compiled, Netlist};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EquivConfig {
    pub vectors: usize,
    pub cycles: usize,
    pub seed: u64,
}

impl Default for EquivConfig {
    fn default() -> Self {
        Self {
            vectors: 500,
            cycles: 64,
            seed: 1,
        }
    }
}

/// First differing output bit found by random simulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub cycle: usize,
    pub vector: usize,
    pub port: String,
    pub expected: bool,
    pub actual: bool,
    /// Inputs of the failing vector for cycles `0..=cycle + latency`; replaying
    /// it through [`super::simulate`] reproduces the difference.
    pub stimulus: Trace,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Equivalent,
    Mismatch(Box<Mismatch>),
}

impl Verdict {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Verdict::Equivalent)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Equivalent => f.write_str("equivalent"),
            Verdict::Mismatch(m) => write!(
                f,
                "mismatch at cycle {} vector {} port {} (expected {}, got {})",
                m.cycle,
                m.vector,
                m.port,
                u8::from(m.expected),
                u8::from(m.actual)
            ),
        }
    }
}

/// Compares `a` at cycle `t` with `b` at cycle `t + latency_b` over
/// `cfg.vectors` random input sequences of `cfg.cycles` cycles.
pub fn check_equivalence(
    a: &Netlist,
    b: &Netlist,
    lib: &CellLibrary,
    cfg: &EquivConfig,
    latency_b: usize,
) -> Result<Verdict> {
    let (fa, fb) = (flat(a)?, flat(b)?);
    let ca = Compiled::new(fa.top_module(), lib)?;
    let cb = Compiled::new(fb.top_module(), lib)?;
    let sa = Simulator::new(&ca)?;
    let sb = Simulator::new(&cb)?;

    let names = |c: &Compiled<'_>, s: &Simulator<'_, '_>| -> Vec<String> {
        s.data_inputs()
            .iter()
            .map(|&i| c.inputs[i].0.clone())
            .collect()
    };
    let in_a = names(&ca, &sa);
    let in_b = names(&cb, &sb);
    let set_a: BTreeSet<&String> = in_a.iter().collect();
    let set_b: BTreeSet<&String> = in_b.iter().collect();
    if set_a != set_b {
        let diff: Vec<&&String> = set_a.symmetric_difference(&set_b).collect();
        return Err(Error::InterfaceMismatch(format!(
            "data inputs differ: {diff:?}"
        )));
    }
    let out_a: Vec<&String> = ca.outputs.iter().map(|(p, _)| p).collect();
    let out_b: Vec<&String> = cb.outputs.iter().map(|(p, _)| p).collect();
    let oa: BTreeSet<&&String> = out_a.iter().collect();
    let ob: BTreeSet<&&String> = out_b.iter().collect();
    if oa != ob {
        return Err(Error::InterfaceMismatch("output ports differ".into()));
    }
    let b_out_index: Vec<usize> = out_a
        .iter()
        .map(|p| out_b.iter().position(|q| q == p).expect("same output set"))
        .collect();

    // Stimulus columns in sorted-name order so both sides draw identically.
    let sorted: Vec<&String> = set_a.iter().copied().collect();
    let col_a: Vec<usize> = in_a
        .iter()
        .map(|n| sorted.iter().position(|s| *s == n).unwrap())
        .collect();
    let col_b: Vec<usize> = in_b
        .iter()
        .map(|n| sorted.iter().position(|s| *s == n).unwrap())
        .collect();

    let total = cfg.cycles + latency_b;
    let words = cfg.vectors.div_ceil(64);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for w in 0..words {
        let lanes = (cfg.vectors - w * 64).min(64);
        let lane_mask = if lanes == 64 { !0 } else { (1u64 << lanes) - 1 };
        let stim: Vec<Vec<u64>> = (0..total)
            .map(|_| (0..sorted.len()).map(|_| rng.random::<u64>()).collect())
            .collect();
        let mut sa = Simulator::new(&ca)?;
        let mut sb = Simulator::new(&cb)?;
        let mut ya = Vec::with_capacity(total);
        let mut yb = Vec::with_capacity(total);
        for row in &stim {
            let ia: Vec<u64> = col_a.iter().map(|&c| row[c]).collect();
            let ib: Vec<u64> = col_b.iter().map(|&c| row[c]).collect();
            ya.push(sa.step(&ia));
            yb.push(sb.step(&ib));
        }
        for t in 0..cfg.cycles {
            for (k, &kb) in b_out_index.iter().enumerate() {
                let diff = (ya[t][k] ^ yb[t + latency_b][kb]) & lane_mask;
                if diff != 0 {
                    let lane = diff.trailing_zeros() as usize;
                    let stimulus = Trace {
                        ports: sorted.iter().map(|s| s.to_string()).collect(),
                        rows: stim[..=t + latency_b]
                            .iter()
                            .map(|r| r.iter().map(|w| (w >> lane) & 1 == 1).collect())
                            .collect(),
                    };
                    return Ok(Verdict::Mismatch(Box::new(Mismatch {
                        cycle: t,
                        vector: w * 64 + lane,
                        port: out_a[k].clone(),
                        expected: (ya[t][k] >> lane) & 1 == 1,
                        actual: (yb[t + latency_b][kb] >> lane) & 1 == 1,
                        stimulus,
                    })));
                }
            }
        }
    }
    Ok(Verdict::Equivalent)
}
