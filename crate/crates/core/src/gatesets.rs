//! Gate groups, their twirl projectors, and noise assignments.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liouville::{
    direct_sum, hs_inner, kron, matrix_from_pairs, matrix_to_pairs, max_abs_diff, numerical_rank,
    paulis, unitarity_deviation, vec_rowmajor, CMatrix, Channel, SpaceSpec, DEFAULT_TOL,
};
use crate::rng::RandomStream;

/// A finite set of unitaries on `H`, closed under multiplication up to a
/// global phase.
#[derive(Clone, Debug)]
pub struct GateSet {
    label: String,
    space: SpaceSpec,
    gates: Vec<CMatrix>,
    liouville: Vec<CMatrix>,
}

impl GateSet {
    /// Builds a gate set, checking unitarity and closure up to global phase.
    pub fn new(label: impl Into<String>, space: SpaceSpec, gates: Vec<CMatrix>) -> Result<Self> {
        let gs = Self::new_unchecked(label, space, gates)?;
        gs.check_unitary(DEFAULT_TOL)?;
        gs.check_closure(DEFAULT_TOL)?;
        Ok(gs)
    }

    /// Builds a gate set without the unitarity and closure checks. Used for
    /// custom sets and for corrupted fixtures in the property suite.
    pub fn new_unchecked(
        label: impl Into<String>,
        space: SpaceSpec,
        gates: Vec<CMatrix>,
    ) -> Result<Self> {
        if gates.is_empty() {
            return Err(Error::EmptyGateSet);
        }
        let d = space.d();
        for g in &gates {
            if g.shape() != (d, d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: g.nrows(),
                });
            }
        }
        let liouville = gates
            .iter()
            .map(|g| kron(g, &g.map(|z| z.conj())))
            .collect();
        Ok(Self {
            label: label.into(),
            space,
            gates,
            liouville,
        })
    }

    /// `{I, X, Y, Z}` on a qubit.
    pub fn pauli() -> Self {
        Self::new("pauli", SpaceSpec::qubit(), paulis().to_vec()).expect("Paulis form a group")
    }

    /// `{P ⊕ ±1 : P ∈ {I, X, Y, Z}}` on a qubit plus one leakage level.
    pub fn shelving() -> Self {
        let one = GateSet::new(
            "trivial",
            SpaceSpec::full(1).unwrap(),
            vec![CMatrix::identity(1, 1)],
        )
        .unwrap();
        Self::block(&Self::pauli(), &one).expect("block set of groups is a group")
    }

    /// `{v ⊕ μ w : v ∈ V, w ∈ W, μ = ±1}` for 1-designs `V` on `H1` and `W` on `H2`.
    pub fn block(v_set: &GateSet, w_set: &GateSet) -> Result<Self> {
        let space = SpaceSpec::new(v_set.space.d(), w_set.space.d())?;
        let mut gates = Vec::with_capacity(2 * v_set.size() * w_set.size());
        for v in &v_set.gates {
            for mu in [1.0, -1.0] {
                for w in &w_set.gates {
                    gates.push(direct_sum(v, &w.scale(mu)));
                }
            }
        }
        let label = if v_set.label == "pauli" && w_set.size() == 1 && w_set.space.d() == 1 {
            "shelving".to_string()
        } else {
            format!("block({},{})", v_set.label, w_set.label)
        };
        Self::new(label, space, gates)
    }

    /// Named gate sets: `"pauli"` or `"shelving"`.
    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "pauli" => Ok(Self::pauli()),
            "shelving" => Ok(Self::shelving()),
            other => Err(Error::Config(format!("unknown gate set '{other}'"))),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let gs = Self::from_json_unchecked(s)?;
        gs.check_unitary(DEFAULT_TOL)?;
        gs.check_closure(DEFAULT_TOL)?;
        Ok(gs)
    }

    pub fn from_json_unchecked(s: &str) -> Result<Self> {
        let doc: GateSetDoc = serde_json::from_str(s)?;
        let space = SpaceSpec::new(doc.d1, doc.d2)?;
        let gates = doc
            .gates
            .iter()
            .map(|g| matrix_from_pairs(g, space.d()))
            .collect::<Result<Vec<_>>>()?;
        Self::new_unchecked(doc.label.unwrap_or_else(|| "custom".into()), space, gates)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&GateSetDoc {
            label: Some(self.label.clone()),
            d1: self.space.d1(),
            d2: self.space.d2(),
            gates: self.gates.iter().map(matrix_to_pairs).collect(),
        })?)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn space(&self) -> SpaceSpec {
        self.space
    }

    pub fn size(&self) -> usize {
        self.gates.len()
    }

    pub fn gates(&self) -> &[CMatrix] {
        &self.gates
    }

    pub fn gate(&self, i: usize) -> Result<&CMatrix> {
        self.gates.get(i).ok_or(Error::InvalidIndex {
            index: i,
            size: self.gates.len(),
        })
    }

    /// `g ⊗ conj(g)` for gate `i`.
    pub fn gate_liouville(&self, i: usize) -> Result<&CMatrix> {
        self.liouville.get(i).ok_or(Error::InvalidIndex {
            index: i,
            size: self.gates.len(),
        })
    }

    pub fn check_unitary(&self, tol: f64) -> Result<()> {
        for (index, g) in self.gates.iter().enumerate() {
            let deviation = unitarity_deviation(g);
            if deviation > tol {
                return Err(Error::NonUnitary { index, deviation });
            }
        }
        Ok(())
    }

    /// Closure up to phase: for every pair the product `g h` matches some
    /// member `k` with `|Tr(k† g h)| / d = 1`.
    ///
    /// With a leakage space the phase may differ between the `H1` and `H2`
    /// blocks, so the overlap is taken per block. `{P ⊕ ±1}` needs this:
    /// `(X ⊕ 1)(Y ⊕ 1) = iZ ⊕ 1`.
    pub fn check_closure(&self, tol: f64) -> Result<()> {
        let blocks: Vec<(usize, usize)> = if self.space.has_leakage() {
            vec![(0, self.space.d1()), (self.space.d1(), self.space.d2())]
        } else {
            vec![(0, self.space.d())]
        };
        let same_up_to_phase = |k: &CMatrix, m: &CMatrix| {
            blocks.iter().all(|&(start, len)| {
                let kb = k.view((start, start), (len, len)).clone_owned();
                let mb = m.view((start, start), (len, len)).clone_owned();
                (hs_inner(&kb, &mb).norm() / len as f64 - 1.0).abs() <= tol
            })
        };
        for (i, g) in self.gates.iter().enumerate() {
            for (j, h) in self.gates.iter().enumerate() {
                let gh = g * h;
                let found = self.gates.iter().any(|k| same_up_to_phase(k, &gh));
                if !found {
                    return Err(Error::NotClosed(i, j));
                }
            }
        }
        Ok(())
    }

    /// Rank of the twirl predicted by the space structure: 1 for a 1-design
    /// on `H`, 2 for a block set on `H1 ⊕ H2`.
    pub fn predicted_rank(&self) -> usize {
        if self.space.has_leakage() {
            2
        } else {
            1
        }
    }

    /// Closed form of the twirl: `|A1)(A1|` with `A1 = I/sqrt(d)` when there is
    /// no leakage space, otherwise `|A1)(A1| + |A2)(A2|` with
    /// `A1 = P_H1/sqrt(d1)`, `A2 = P_H2/sqrt(d2)`.
    pub fn predicted_projector(&self) -> CMatrix {
        twirl_vectors(self.space)
            .iter()
            .map(|v| v * v.adjoint())
            .fold(
                CMatrix::zeros(self.space.d().pow(2), self.space.d().pow(2)),
                |acc, p| acc + p,
            )
    }
}

/// Vectorized normalized projectors spanning the twirl's range, in the
/// canonical basis.
pub fn twirl_vectors(space: SpaceSpec) -> Vec<crate::liouville::CVector> {
    if space.has_leakage() {
        vec![
            vec_rowmajor(&space.projector_h1().unscale((space.d1() as f64).sqrt())),
            vec_rowmajor(&space.projector_h2().unscale((space.d2() as f64).sqrt())),
        ]
    } else {
        let d = space.d();
        vec![vec_rowmajor(
            &CMatrix::identity(d, d).unscale((d as f64).sqrt()),
        )]
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GateSetDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub d1: usize,
    pub d2: usize,
    pub gates: Vec<Vec<[f64; 2]>>,
}

/// `Ḡ = |G|^{-1} Σ_g g ⊗ conj(g)`.
#[derive(Clone, Debug)]
pub struct TwirlProjector {
    pub matrix: CMatrix,
    pub predicted_rank: usize,
}

impl TwirlProjector {
    pub fn rank(&self, tol: f64) -> usize {
        numerical_rank(&self.matrix, tol)
    }

    /// Largest entry of `|Ḡ² - Ḡ|`.
    pub fn idempotence_error(&self) -> f64 {
        max_abs_diff(&(&self.matrix * &self.matrix), &self.matrix)
    }
}

pub fn twirl(gs: &GateSet) -> Result<TwirlProjector> {
    gs.check_unitary(DEFAULT_TOL)?;
    let n = gs.space.d().pow(2);
    let sum = gs
        .liouville
        .iter()
        .fold(CMatrix::zeros(n, n), |acc, l| acc + l);
    Ok(TwirlProjector {
        matrix: sum.unscale(gs.size() as f64),
        predicted_rank: gs.predicted_rank(),
    })
}

/// True iff the twirl equals the closed-form projector for the set's space
/// structure, entrywise within [`DEFAULT_TOL`].
pub fn verify_1design(gs: &GateSet) -> bool {
    match twirl(gs) {
        Ok(t) => max_abs_diff(&t.matrix, &gs.predicted_projector()) <= DEFAULT_TOL,
        Err(_) => false,
    }
}

/// Source of freshly sampled noise channels, one per gate application.
pub trait ChannelSampler: Send + Sync + fmt::Debug {
    fn space(&self) -> SpaceSpec;
    fn sample(&self, rng: &mut RandomStream) -> Channel;
    fn label(&self) -> String;
}

/// Per-gate error channels `E_g`.
#[derive(Clone, Debug)]
pub enum NoiseAssignment {
    /// One fixed channel per gate, indexed like the gate set.
    Fixed(Vec<Channel>),
    /// A fresh channel drawn for every gate application, independent of the gate.
    Stochastic(Arc<dyn ChannelSampler>),
}

impl NoiseAssignment {
    pub fn noiseless(gs: &GateSet) -> Self {
        Self::gate_independent(Channel::identity(gs.space()), gs.size())
    }

    /// The same channel after every gate.
    pub fn gate_independent(ch: Channel, size: usize) -> Self {
        Self::Fixed(vec![ch; size])
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, Self::Stochastic(_))
    }

    pub fn space(&self) -> Option<SpaceSpec> {
        match self {
            Self::Fixed(chs) => chs.first().map(|c| c.space()),
            Self::Stochastic(s) => Some(s.space()),
        }
    }

    pub fn fixed_channels(&self) -> Result<&[Channel]> {
        match self {
            Self::Fixed(chs) => Ok(chs),
            Self::Stochastic(_) => Err(Error::StochasticNoise),
        }
    }

    /// Replaces a sampler by a gate-independent Monte Carlo average over
    /// `n_samples` draws. Fixed assignments are returned unchanged.
    pub fn monte_carlo_average(
        &self,
        size: usize,
        n_samples: usize,
        rng: &mut RandomStream,
    ) -> Result<Self> {
        match self {
            Self::Fixed(_) => Ok(self.clone()),
            Self::Stochastic(s) => {
                let avg = monte_carlo_channel(s.as_ref(), n_samples, rng)?;
                Ok(Self::gate_independent(avg, size))
            }
        }
    }

    pub(crate) fn check_against(&self, gs: &GateSet) -> Result<()> {
        if let Self::Fixed(chs) = self {
            if chs.len() != gs.size() {
                return Err(Error::AssignmentSize {
                    expected: gs.size(),
                    got: chs.len(),
                });
            }
        }
        match self.space() {
            Some(sp) if sp == gs.space() => Ok(()),
            Some(sp) => Err(Error::DimensionMismatch {
                expected: gs.space().d(),
                got: sp.d(),
            }),
            None => Err(Error::AssignmentSize {
                expected: gs.size(),
                got: 0,
            }),
        }
    }
}

/// Channel whose Liouville matrix is the mean over `n_samples` draws.
pub fn monte_carlo_channel(
    sampler: &dyn ChannelSampler,
    n_samples: usize,
    rng: &mut RandomStream,
) -> Result<Channel> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter(
            "n_samples must be at least 1".into(),
        ));
    }
    let space = sampler.space();
    let n = space.d().pow(2);
    let mut acc = CMatrix::zeros(n, n);
    for _ in 0..n_samples {
        acc += sampler.sample(rng).liouville();
    }
    Channel::from_liouville(space, &acc.unscale(n_samples as f64), 1e-12)
}

/// `E = |G|^{-1} Σ_g E_g`.
pub fn average_noise(na: &NoiseAssignment) -> Result<Channel> {
    let chs = na.fixed_channels()?;
    let first = chs.first().ok_or(Error::EmptyGateSet)?;
    if chs.iter().all(|c| c.kraus() == first.kraus()) {
        return Ok(first.clone());
    }
    let w = 1.0 / chs.len() as f64;
    Channel::mixture(chs, &vec![w; chs.len()])
}

/// Liouville matrix of `Δ = |G|^{-1} Σ_g g E_g - Ḡ E`.
pub fn gate_dependence_delta(gs: &GateSet, na: &NoiseAssignment) -> Result<CMatrix> {
    na.check_against(gs)?;
    let chs = na.fixed_channels()?;
    let n = gs.space().d().pow(2);
    let a = gs.size() as f64;
    let mut lhs = CMatrix::zeros(n, n);
    let mut mean_noise = CMatrix::zeros(n, n);
    for (g, ch) in gs.liouville.iter().zip(chs) {
        lhs += g * ch.liouville();
        mean_noise += ch.liouville();
    }
    let gbar = twirl(gs)?.matrix;
    Ok(lhs.unscale(a) - gbar * mean_noise.unscale(a))
}

/// Upper bound on `‖Δ‖⋄`: `d · σ_max(Δ)`.
///
/// `‖Φ‖⋄ ≤ ‖Φ ⊗ id_d‖_{1→1}`, the trace norm on a `d²`-dimensional space is at
/// most `d` times the Frobenius norm, and `σ_max(L ⊗ I) = σ_max(L)`.
pub fn gate_dependence_epsilon(gs: &GateSet, na: &NoiseAssignment) -> Result<f64> {
    let delta = gate_dependence_delta(gs, na)?;
    let smax = delta
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max);
    Ok(gs.space().d() as f64 * smax)
}
