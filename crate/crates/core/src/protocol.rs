//! Randomized benchmarking engine.
//!
//! A sequence `k = (k_1, .., k_m)` of gate indices is run as
//! `g_{k_m} E_{k_m} ... g_{k_1} E_{k_1}` on the prepared state: every step
//! applies the error channel and then the ideal gate. The survival probability
//! is the expectation of the projector onto `H1`. No inversion gate is
//! appended.
//!
//! Gate indices are zero-based throughout the API.

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gatesets::{average_noise, twirl, twirl_vectors, GateSet, NoiseAssignment};
use crate::liouville::{
    basis_state, lambda_pm, s_matrix, vec_rowmajor, CMatrix, CVector, Channel, SpaceSpec, C64,
};
use crate::rng::RandomStream;

/// Upper limit on `|G|^m` for [`brute_force_expectation`].
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

// stream domains for derived seeds
pub(crate) const DOMAIN_SEQUENCE: u64 = 1;
pub(crate) const DOMAIN_NOISE: u64 = 2;
pub(crate) const DOMAIN_ORACLE: u64 = 3;

/// State-preparation and measurement errors. The prepared state is
/// `prep(|0><0|)`; the measured effect is `meas†(P_H1)`, i.e. `meas` acts just
/// before an ideal projective measurement.
#[derive(Clone, Debug, Default)]
pub struct Spam {
    pub prep: Option<Channel>,
    pub meas: Option<Channel>,
}

impl Spam {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn state(&self, space: SpaceSpec) -> Result<CMatrix> {
        let rho = basis_state(space.d(), 0);
        match &self.prep {
            Some(ch) => {
                check_space(ch.space(), space)?;
                Ok(ch.apply(&rho))
            }
            None => Ok(rho),
        }
    }

    pub fn effect(&self, space: SpaceSpec) -> Result<CMatrix> {
        let e = space.projector_h1();
        match &self.meas {
            Some(ch) => {
                check_space(ch.space(), space)?;
                Ok(ch.apply_adjoint(&e))
            }
            None => Ok(e),
        }
    }
}

fn check_space(got: SpaceSpec, expected: SpaceSpec) -> Result<()> {
    if got != expected {
        return Err(Error::DimensionMismatch {
            expected: expected.d(),
            got: got.d(),
        });
    }
    Ok(())
}

/// Row vector `(E|` in the canonical basis: `Tr[E† A_i] = conj(E[i, j])`.
fn effect_row(e: &CMatrix) -> CVector {
    vec_rowmajor(e).map(|z| z.conj())
}

fn born(effect: &CVector, state: &CVector) -> f64 {
    effect
        .iter()
        .zip(state.iter())
        .map(|(a, b)| a * b)
        .sum::<C64>()
        .re
}

/// `m` indices drawn uniformly from `{0, .., a-1}`.
pub fn sample_sequence(m: usize, a: usize, rng: &mut RandomStream) -> Result<Vec<usize>> {
    if m == 0 || a == 0 {
        return Err(Error::InvalidParameter(
            "sequence length and gate count must be positive".into(),
        ));
    }
    Ok((0..m).map(|_| rng.index(a)).collect())
}

/// Precomputed pieces for running many sequences on one gate set.
#[derive(Debug)]
pub struct SequenceRunner<'a> {
    gs: &'a GateSet,
    noise: &'a NoiseAssignment,
    /// `g E_g` for fixed noise.
    steps: Vec<CMatrix>,
    state: CVector,
    effect: CVector,
}

impl<'a> SequenceRunner<'a> {
    pub fn new(gs: &'a GateSet, noise: &'a NoiseAssignment, spam: &Spam) -> Result<Self> {
        noise.check_against(gs)?;
        let space = gs.space();
        let steps = match noise {
            NoiseAssignment::Fixed(chs) => (0..gs.size())
                .map(|i| Ok(gs.gate_liouville(i)? * chs[i].liouville()))
                .collect::<Result<Vec<_>>>()?,
            NoiseAssignment::Stochastic(_) => Vec::new(),
        };
        Ok(Self {
            gs,
            noise,
            steps,
            state: vec_rowmajor(&spam.state(space)?),
            effect: effect_row(&spam.effect(space)?),
        })
    }

    /// Exact survival probability of one sequence. Stochastic noise draws a
    /// fresh channel from `rng` at every step.
    pub fn probability(&self, k: &[usize], rng: &mut RandomStream) -> Result<f64> {
        let a = self.gs.size();
        let mut v = self.state.clone();
        for &idx in k {
            if idx >= a {
                return Err(Error::InvalidIndex {
                    index: idx,
                    size: a,
                });
            }
            v = match self.noise {
                NoiseAssignment::Fixed(_) => &self.steps[idx] * v,
                NoiseAssignment::Stochastic(s) => {
                    let ch = s.sample(rng);
                    self.gs.gate_liouville(idx)? * (ch.liouville() * v)
                }
            };
        }
        Ok(born(&self.effect, &v))
    }
}

pub fn run_sequence(
    k: &[usize],
    gs: &GateSet,
    noise: &NoiseAssignment,
    spam: &Spam,
    rng: &mut RandomStream,
) -> Result<f64> {
    SequenceRunner::new(gs, noise, spam)?.probability(k, rng)
}

/// Fraction of successes in `shots` Bernoulli trials with success probability `p`.
pub fn shot_estimate(p: f64, shots: u64, rng: &mut RandomStream) -> Result<f64> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be positive".into()));
    }
    // exact probabilities may overshoot [0, 1] by round-off
    let p = p.clamp(0.0, 1.0);
    let dist = Binomial::new(shots, p).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(dist.sample(rng) as f64 / shots as f64)
}

/// Exact average of the survival probability over all `|G|^m` sequences,
/// by enumeration.
pub fn brute_force_expectation(
    m: usize,
    gs: &GateSet,
    noise: &NoiseAssignment,
    spam: &Spam,
) -> Result<f64> {
    if noise.is_stochastic() {
        return Err(Error::StochasticNoise);
    }
    if m == 0 {
        return Err(Error::InvalidParameter("m must be at least 1".into()));
    }
    let a = gs.size();
    let count = (a as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::EnumerationTooLarge(count));
    }
    let runner = SequenceRunner::new(gs, noise, spam)?;
    // depth-first over sequences, reusing prefix states
    fn walk(runner: &SequenceRunner, v: &CVector, depth: usize, acc: &mut f64) {
        if depth == 0 {
            *acc += born(&runner.effect, v);
            return;
        }
        for step in &runner.steps {
            walk(runner, &(step * v), depth - 1, acc);
        }
    }
    let mut total = 0.0;
    walk(&runner, &runner.state, m, &mut total);
    Ok(total / count as f64)
}

/// Closed-form decay `E_k p_k` for gate-independent noise averaged to `E`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DecayPrediction {
    /// `A s^(m-1)`
    SingleExp { a: f64, s: f64 },
    /// `B λ+^(m-1) + C λ-^(m-1)`
    DoubleExp {
        b: f64,
        c: f64,
        lambda_plus: f64,
        lambda_minus: f64,
    },
}

impl DecayPrediction {
    pub fn at(&self, m: usize) -> f64 {
        let e = m as i32 - 1;
        match *self {
            Self::SingleExp { a, s } => a * s.powi(e),
            Self::DoubleExp {
                b,
                c,
                lambda_plus,
                lambda_minus,
            } => b * lambda_plus.powi(e) + c * lambda_minus.powi(e),
        }
    }
}

/// Decay constants from the twirl algebra: with `Ḡ = Σ_i |A_i)(A_i|`,
/// `E_k p_k = Σ_ij (E|A_i) (S^(m-1))_ij (A_j|E(ρ))`, where `S_ij = (A_i|E|A_j)`.
/// For a leakage space the powers of the 2x2 block are split with its
/// spectral projectors.
pub fn predict_decay(
    space: SpaceSpec,
    avg_noise: &Channel,
    spam: &Spam,
) -> Result<DecayPrediction> {
    check_space(avg_noise.space(), space)?;
    let rho = spam.state(space)?;
    let effect = effect_row(&spam.effect(space)?);
    let rho_prime = vec_rowmajor(&avg_noise.apply(&rho));
    let vecs = twirl_vectors(space);
    let e: Vec<f64> = vecs.iter().map(|a| born(&effect, a)).collect();
    let r: Vec<f64> = vecs.iter().map(|a| a.dotc(&rho_prime).re).collect();
    if !space.has_leakage() {
        let l = avg_noise.liouville();
        let s = vecs[0].dotc(&(l * &vecs[0])).re;
        return Ok(DecayPrediction::SingleExp { a: e[0] * r[0], s });
    }
    let sm = s_matrix(avg_noise)?;
    let (lp, lm) = lambda_pm(&sm)?;
    let gap = lp - lm;
    let quad = |p: [[f64; 2]; 2]| {
        (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| e[i] * p[i][j] * r[j])
            .sum::<f64>()
    };
    if gap.abs() < 1e-12 {
        // S = λ I + N with N nilpotent when the eigenvalues coincide; only
        // the diagonalizable case is representable as a double exponential.
        let total = quad([[1.0, 0.0], [0.0, 1.0]]);
        return Ok(DecayPrediction::DoubleExp {
            b: total,
            c: 0.0,
            lambda_plus: lp,
            lambda_minus: lm,
        });
    }
    let s = sm.0;
    // Π+ = (S - λ- I)/(λ+ - λ-), Π- = (λ+ I - S)/(λ+ - λ-)
    let pi_plus = [
        [(s[0][0] - lm) / gap, s[0][1] / gap],
        [s[1][0] / gap, (s[1][1] - lm) / gap],
    ];
    let pi_minus = [
        [(lp - s[0][0]) / gap, -s[0][1] / gap],
        [-s[1][0] / gap, (lp - s[1][1]) / gap],
    ];
    Ok(DecayPrediction::DoubleExp {
        b: quad(pi_plus),
        c: quad(pi_minus),
        lambda_plus: lp,
        lambda_minus: lm,
    })
}

/// `Ḡ L Ḡ` and the block `Σ_ij S_ij |A_i)(A_j|` it should equal.
pub fn twirl_sandwich(gs: &GateSet, ch: &Channel) -> Result<(CMatrix, CMatrix)> {
    let gbar = twirl(gs)?.matrix;
    let lhs = &gbar * ch.liouville() * &gbar;
    let vecs = twirl_vectors(gs.space());
    let n = gs.space().d().pow(2);
    let mut rhs = CMatrix::zeros(n, n);
    for ai in &vecs {
        for aj in &vecs {
            let sij = ai.dotc(&(ch.liouville() * aj));
            rhs += (ai * aj.adjoint()) * sij;
        }
    }
    Ok((lhs, rhs))
}

/// Average-noise decay prediction for a fixed assignment on a gate set.
pub fn predict_for(gs: &GateSet, noise: &NoiseAssignment, spam: &Spam) -> Result<DecayPrediction> {
    predict_decay(gs.space(), &average_noise(noise)?, spam)
}

/// One executed sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub m: usize,
    pub k: Vec<usize>,
    pub p_k: f64,
}

/// Summary statistics at one sequence length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub m: usize,
    pub mean: f64,
    pub sem: f64,
    pub n: usize,
}

impl DecayPoint {
    /// Mean and standard error of the mean (sample standard deviation over
    /// `sqrt(n)`; zero for a single sample).
    pub fn from_samples(m: usize, samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let sem = if n > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { m, mean, sem, n }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub rng_algorithm: String,
    pub gateset: String,
    pub noise: String,
    pub shots: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayDataset {
    pub points: Vec<DecayPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl DecayDataset {
    pub fn from_points(points: Vec<DecayPoint>) -> Self {
        Self {
            points,
            provenance: None,
        }
    }

    pub fn ms(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.m).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean).collect()
    }

    pub fn sems(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.sem).collect()
    }

    /// CSV with header `m,mean,sem,n`. Floats use the shortest round-trip
    /// representation, so identical data gives identical bytes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,mean,sem,n\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{},{}\n", p.m, p.mean, p.sem, p.n));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("empty CSV".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["m", "mean", "sem", "n"] {
            return Err(Error::Config(format!("unexpected CSV header '{header}'")));
        }
        let mut points = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || Error::Config(format!("malformed CSV row {}: '{line}'", lineno + 2));
            if f.len() != 4 {
                return Err(bad());
            }
            points.push(DecayPoint {
                m: f[0].parse().map_err(|_| bad())?,
                mean: f[1].parse().map_err(|_| bad())?,
                sem: f[2].parse().map_err(|_| bad())?,
                n: f[3].parse().map_err(|_| bad())?,
            });
        }
        Ok(Self::from_points(points))
    }
}

/// Runs `n_sequences` random sequences at every length. Sequence `j` at
/// length `m` uses the stream derived from `(seed, m, j)`, so the result does
/// not depend on `jobs`.
pub fn run_sequences(
    gs: &GateSet,
    noise: &NoiseAssignment,
    spam: &Spam,
    m_list: &[usize],
    n_sequences: usize,
    shots: Option<u64>,
    seed: u64,
    jobs: usize,
) -> Result<Vec<SequenceRecord>> {
    if m_list.is_empty() || m_list.contains(&0) || n_sequences == 0 {
        return Err(Error::InvalidParameter(
            "need nonempty positive m_list and n_sequences >= 1".into(),
        ));
    }
    let runner = SequenceRunner::new(gs, noise, spam)?;
    let tasks: Vec<(usize, usize)> = m_list
        .iter()
        .flat_map(|&m| (0..n_sequences).map(move |j| (m, j)))
        .collect();
    let work = |&(m, j): &(usize, usize)| -> Result<SequenceRecord> {
        let mut rng = RandomStream::derive(seed, &[DOMAIN_SEQUENCE, m as u64, j as u64]);
        let k = sample_sequence(m, gs.size(), &mut rng)?;
        let mut p = runner.probability(&k, &mut rng)?;
        if let Some(s) = shots {
            p = shot_estimate(p, s, &mut rng)?;
        }
        Ok(SequenceRecord { m, k, p_k: p })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    pool.install(|| tasks.par_iter().map(work).collect())
}

/// Aggregates records per `m` in first-appearance order.
pub fn aggregate(records: &[SequenceRecord]) -> Vec<DecayPoint> {
    let mut ms: Vec<usize> = Vec::new();
    for r in records {
        if !ms.contains(&r.m) {
            ms.push(r.m);
        }
    }
    ms.into_iter()
        .map(|m| {
            let samples: Vec<f64> = records.iter().filter(|r| r.m == m).map(|r| r.p_k).collect();
            DecayPoint::from_samples(m, &samples)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouville::{paulis, SpaceSpec};
    use crate::noise::{filter_channel, sample_filter_model, FilterParams};

    #[test]
    fn sample_sequence_examples() {
        let mut rng = RandomStream::new(1);
        assert_eq!(sample_sequence(7, 1, &mut rng).unwrap(), vec![0; 7]);
        let a = sample_sequence(20, 4, &mut RandomStream::new(3)).unwrap();
        let b = sample_sequence(20, 4, &mut RandomStream::new(3)).unwrap();
        assert_eq!(a, b);
        assert!(sample_sequence(0, 4, &mut rng).is_err());
    }

    #[test]
    fn sample_sequence_is_uniform() {
        let mut rng = RandomStream::new(99);
        let k = sample_sequence(100_000, 4, &mut rng).unwrap();
        for g in 0..4 {
            let f = k.iter().filter(|&&x| x == g).count() as f64 / k.len() as f64;
            assert!((f - 0.25).abs() < 0.005);
        }
    }

    #[test]
    fn noiseless_sequences_survive() {
        let mut rng = RandomStream::new(5);
        for gs in [GateSet::pauli(), GateSet::shelving()] {
            let na = NoiseAssignment::noiseless(&gs);
            let k = sample_sequence(30, gs.size(), &mut rng).unwrap();
            let p = run_sequence(&k, &gs, &na, &Spam::ideal(), &mut rng).unwrap();
            assert!((p - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn filter_aligned_single_step() {
        let gs = GateSet::pauli();
        let ch = filter_channel(&FilterParams::new(0.04, [0.0, 0.0, 1.0]).unwrap()).unwrap();
        let na = NoiseAssignment::gate_independent(ch, 4);
        let p = run_sequence(&[0], &gs, &na, &Spam::ideal(), &mut RandomStream::new(0)).unwrap();
        assert!((p - 1.0).abs() < 1e-14);
        // after an X the state is |1>, attenuated by the second step
        let p2 =
            run_sequence(&[1, 0], &gs, &na, &Spam::ideal(), &mut RandomStream::new(0)).unwrap();
        assert!((p2 - 0.96).abs() < 1e-14);
    }

    #[test]
    fn run_sequence_matches_kraus_application() {
        let gs = GateSet::pauli();
        let model = sample_filter_model(&mut RandomStream::new(12));
        let na = model.assignment().unwrap();
        let chs = na.fixed_channels().unwrap();
        let k = [2, 1, 3, 3, 0, 1];
        let mut rho = basis_state(2, 0);
        for &i in &k {
            let g = &gs.gates()[i];
            rho = g * chs[i].apply(&rho) * g.adjoint();
        }
        let expect = rho.trace().re;
        let got = run_sequence(&k, &gs, &na, &Spam::ideal(), &mut RandomStream::new(0)).unwrap();
        assert!((got - expect).abs() < 1e-13);
    }

    #[test]
    fn run_sequence_rejects_bad_index() {
        let gs = GateSet::pauli();
        let na = NoiseAssignment::noiseless(&gs);
        assert!(matches!(
            run_sequence(&[4], &gs, &na, &Spam::ideal(), &mut RandomStream::new(0)),
            Err(Error::InvalidIndex { .. })
        ));
        let wrong = NoiseAssignment::noiseless(&GateSet::shelving());
        assert!(
            run_sequence(&[0], &gs, &wrong, &Spam::ideal(), &mut RandomStream::new(0)).is_err()
        );
    }

    #[test]
    fn shot_estimate_edges_and_statistics() {
        let mut rng = RandomStream::new(17);
        assert_eq!(shot_estimate(1.0, 123, &mut rng).unwrap(), 1.0);
        assert_eq!(shot_estimate(0.0, 123, &mut rng).unwrap(), 0.0);
        assert!(shot_estimate(0.5, 0, &mut rng).is_err());
        let reps = 2000;
        let shots = 10_000;
        let xs: Vec<f64> = (0..reps)
            .map(|_| shot_estimate(0.5, shots, &mut rng).unwrap())
            .collect();
        let mean = xs.iter().sum::<f64>() / reps as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        assert!((mean - 0.5).abs() < 0.01);
        let expect = 0.25 / shots as f64;
        assert!((var / expect - 1.0).abs() < 0.15);
    }

    #[test]
    fn brute_force_m1_is_mean_over_gates() {
        let gs = GateSet::pauli();
        let na = sample_filter_model(&mut RandomStream::new(4))
            .assignment()
            .unwrap();
        let bf = brute_force_expectation(1, &gs, &na, &Spam::ideal()).unwrap();
        let mean = (0..4)
            .map(|i| {
                run_sequence(&[i], &gs, &na, &Spam::ideal(), &mut RandomStream::new(0)).unwrap()
            })
            .sum::<f64>()
            / 4.0;
        assert!((bf - mean).abs() < 1e-15);
    }

    #[test]
    fn brute_force_guards() {
        let gs = GateSet::shelving();
        let na = NoiseAssignment::noiseless(&gs);
        assert!(matches!(
            brute_force_expectation(8, &gs, &na, &Spam::ideal()),
            Err(Error::EnumerationTooLarge(_))
        ));
        let st = crate::noise::shelving_assignment(Default::default());
        assert!(matches!(
            brute_force_expectation(2, &gs, &st, &Spam::ideal()),
            Err(Error::StochasticNoise)
        ));
    }

    #[test]
    fn spam_channels_enter_state_and_effect() {
        let space = SpaceSpec::qubit();
        let flip = Channel::unitary(space, paulis()[1].clone()).unwrap();
        let spam = Spam {
            prep: Some(flip.clone()),
            meas: None,
        };
        assert_eq!(spam.state(space).unwrap(), basis_state(2, 1));
        let spam = Spam {
            prep: None,
            meas: Some(flip),
        };
        // P_H1 = I on a qubit, invariant under the flip
        assert_eq!(spam.effect(space).unwrap(), CMatrix::identity(2, 2));
    }

    #[test]
    fn decay_point_statistics() {
        let p = DecayPoint::from_samples(10, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.mean, 2.5);
        assert!((p.sem - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(DecayPoint::from_samples(1, &[0.3]).sem, 0.0);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let ds = DecayDataset::from_points(vec![
            DecayPoint {
                m: 10,
                mean: 0.9,
                sem: 0.01,
                n: 30,
            },
            DecayPoint {
                m: 20,
                mean: 0.81,
                sem: 0.0123456789,
                n: 30,
            },
        ]);
        let csv = ds.to_csv();
        assert!(csv.starts_with("m,mean,sem,n\n"));
        assert_eq!(DecayDataset::from_csv(&csv).unwrap().points, ds.points);
        assert!(DecayDataset::from_csv("a,b\n1,2\n").is_err());
        assert!(DecayDataset::from_csv("m,mean,sem,n\n1,2,3\n").is_err());
    }

    #[test]
    fn run_sequences_independent_of_jobs() {
        let gs = GateSet::shelving();
        let na = crate::noise::shelving_assignment(Default::default());
        let a = run_sequences(&gs, &na, &Spam::ideal(), &[1, 5], 6, None, 42, 1).unwrap();
        let b = run_sequences(&gs, &na, &Spam::ideal(), &[1, 5], 6, None, 42, 4).unwrap();
        assert_eq!(a, b);
        let pts = aggregate(&a);
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].n, 6);
    }
}
