//! Mode-wise increments of the stochastic convolution.
//!
//! Over one step of length `δ` the stochastic convolution
//! `∫∫ G_{t_{i+1}-s}(x,y) W(ds,dy)` has, in eigen-coordinates, independent
//! centred Gaussian components `ξ_{k,i}` with variance
//! `v_k(δ) = ∫_0^δ e^{-2λ_k s} ds = (1 - e^{-2λ_k δ})/(2λ_k)`.
//!
//! Draws are keyed by `(master_seed, path, step, mode)` through a ChaCha8
//! stream per `(master_seed, mode)` pair, selected by `path` as the stream
//! id and read at word position `step`. The value of any single increment
//! therefore depends on nothing else: not on the thread schedule, the number
//! of steps or the number of modes in the plan.

use crate::error::{Error, Result};
use crate::kernels::{eigenvalue, BoundaryCondition};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::distribution::{ContinuousCDF, Normal};
use std::io::{Read, Write};
use std::sync::OnceLock;

/// Pinned identification of the generator, embedded in every report.
pub const GENERATOR_ID: &str =
    "chacha8(rand_chacha 0.9; key=le(seed)|le(mode)|\"shelab-noise-v1\"; stream=path; word=step) + inverse-cdf normal";

const KEY_TAG: &[u8; 16] = b"shelab-noise-v1\0";
const DUMP_MAGIC: &[u8; 8] = b"SHENOISE";
const DUMP_VERSION: u64 = 1;

/// Step size and resolution of a noise tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisePlan {
    pub bc: BoundaryCondition,
    pub delta: f64,
    pub steps: usize,
    pub max_mode: usize,
}

impl NoisePlan {
    /// Plan for `steps` steps of size `horizon / steps`.
    pub fn new(bc: BoundaryCondition, horizon: f64, steps: usize, max_mode: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::domain("a noise plan needs at least one step"));
        }
        if bc == BoundaryCondition::Dirichlet && max_mode == 0 {
            return Err(Error::domain("Dirichlet noise needs K ≥ 1"));
        }
        Ok(NoisePlan { bc, delta: horizon / steps as f64, steps, max_mode })
    }

    pub fn horizon(&self) -> f64 {
        self.delta * self.steps as f64
    }

    pub fn mode_count(&self) -> usize {
        self.bc.mode_count(self.max_mode)
    }

    /// Per-mode increment variances `v_k(δ)` in storage order.
    pub fn variances(&self) -> Vec<f64> {
        let first = self.bc.first_mode();
        (0..self.mode_count()).map(|i| mode_variance(eigenvalue(i + first), self.delta)).collect()
    }
}

/// `v(λ, δ) = ∫_0^δ e^{-2λs} ds`, with a Taylor branch for `λδ < 1e-8`.
pub fn mode_variance(lambda: f64, delta: f64) -> f64 {
    let z = lambda * delta;
    if z < 1e-8 {
        delta * (1.0 - z + 2.0 * z * z / 3.0)
    } else {
        -(-2.0 * z).exp_m1() / (2.0 * lambda)
    }
}

/// Immutable table of increments `ξ_{k,i}`, stored step-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTensor {
    plan: NoisePlan,
    seed: u64,
    path: u64,
    data: Vec<f64>,
}

impl NoiseTensor {
    pub fn plan(&self) -> &NoisePlan {
        &self.plan
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> u64 {
        self.path
    }

    /// Increments of all modes at step `i`.
    pub fn step(&self, i: usize) -> &[f64] {
        let n = self.plan.mode_count();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn get(&self, step: usize, mode_index: usize) -> f64 {
        self.data[step * self.plan.mode_count() + mode_index]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Writes the tensor in the audit format: magic `SHENOISE`, then
    /// little-endian `version, seed, path, steps, K` as u64 and `delta` as
    /// f64, then all increments step-major as f64.
    pub fn write_dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(DUMP_MAGIC)?;
        for v in [DUMP_VERSION, self.seed, self.path, self.plan.steps as u64, self.plan.max_mode as u64] {
            out.write_all(&v.to_le_bytes())?;
        }
        out.write_all(&self.plan.delta.to_le_bytes())?;
        for v in &self.data {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a dump written by [`write_dump`](Self::write_dump). The
    /// boundary condition is recovered from the payload length.
    pub fn read_dump<R: Read>(mut input: R) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let bad = |m: &str| Error::Config(format!("malformed noise dump: {m}"));
        if bytes.len() < 56 || &bytes[..8] != DUMP_MAGIC {
            return Err(bad("missing header"));
        }
        let word = |i: usize| u64::from_le_bytes(bytes[8 + 8 * i..16 + 8 * i].try_into().unwrap());
        if word(0) != DUMP_VERSION {
            return Err(bad("unsupported version"));
        }
        let (seed, path, steps, max_mode) = (word(1), word(2), word(3) as usize, word(4) as usize);
        let delta = f64::from_bits(word(5));
        let payload = &bytes[56..];
        if payload.len() % 8 != 0 || steps == 0 {
            return Err(bad("truncated payload"));
        }
        let count = payload.len() / 8;
        let bc = if count == steps * (max_mode + 1) {
            BoundaryCondition::Neumann
        } else if count == steps * max_mode {
            BoundaryCondition::Dirichlet
        } else {
            return Err(bad("payload length does not match steps and K"));
        };
        let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(NoiseTensor { plan: NoisePlan { bc, delta, steps, max_mode }, seed, path, data })
    }
}

fn standard_normal() -> &'static Normal {
    static N: OnceLock<Normal> = OnceLock::new();
    N.get_or_init(Normal::standard)
}

/// Uniform on the open interval (0, 1) from the top 53 bits.
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn mode_stream(master_seed: u64, path: u64, mode: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&(mode as u64).to_le_bytes());
    key[16..].copy_from_slice(KEY_TAG);
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(path);
    rng
}

/// Standard normal draws `Z_{k,i}` for `i < steps`, keyed by mode number `k`.
pub fn standard_draws(master_seed: u64, path: u64, mode: usize, steps: usize) -> Vec<f64> {
    let mut rng = mode_stream(master_seed, path, mode);
    let normal = standard_normal();
    (0..steps).map(|_| normal.inverse_cdf(open_unit(rng.next_u64()))).collect()
}

/// Samples the increments of one path.
pub fn sample_increments(master_seed: u64, path: u64, plan: &NoisePlan) -> NoiseTensor {
    let n = plan.mode_count();
    let first = plan.bc.first_mode();
    let mut data = vec![0.0; plan.steps * n];
    let mut rng;
    let normal = standard_normal();
    for (i, sd) in plan.variances().into_iter().map(f64::sqrt).enumerate() {
        rng = mode_stream(master_seed, path, i + first);
        for s in 0..plan.steps {
            data[s * n + i] = sd * normal.inverse_cdf(open_unit(rng.next_u64()));
        }
    }
    NoiseTensor { plan: *plan, seed: master_seed, path, data }
}

/// Exact increments over groups of `ratio` consecutive fine steps:
/// `ξ^c_{k,i} = Σ_{j<r} e^{-λ_k (r-1-j) δ_f} ξ^f_{k, i r + j}`.
pub fn aggregate_to_coarse(fine: &NoiseTensor, ratio: usize) -> Result<NoiseTensor> {
    let plan = fine.plan;
    if ratio == 0 || !plan.steps.is_multiple_of(ratio) {
        return Err(Error::domain(format!("{} fine steps are not divisible by ratio {ratio}", plan.steps)));
    }
    if ratio == 1 {
        return Ok(fine.clone());
    }
    let n = plan.mode_count();
    let first = plan.bc.first_mode();
    let decay: Vec<f64> = (0..n).map(|i| (-eigenvalue(i + first) * plan.delta).exp()).collect();
    let coarse_steps = plan.steps / ratio;
    let mut data = vec![0.0; coarse_steps * n];
    for c in 0..coarse_steps {
        let out = &mut data[c * n..(c + 1) * n];
        for j in 0..ratio {
            let row = fine.step(c * ratio + j);
            for ((o, w), x) in out.iter_mut().zip(&decay).zip(row) {
                *o = *o * w + x;
            }
        }
    }
    Ok(NoiseTensor {
        plan: NoisePlan { delta: plan.delta * ratio as f64, steps: coarse_steps, ..plan },
        seed: fine.seed,
        path: fine.path,
        data,
    })
}
