//! Leakage noise models: the weak filter channel on a qubit and imperfect
//! shelving on a qubit plus one auxiliary level.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gatesets::{monte_carlo_channel, ChannelSampler, NoiseAssignment};
use crate::liouville::{
    direct_sum, paulis, CMatrix, Channel, SpaceSpec, C64, DEFAULT_TOL, ONE, ZERO,
};
pub use crate::rng::{RandomStream, RNG_ALGORITHM};

/// Upper end of the filter-strength distribution.
pub const FILTER_P_MAX: f64 = 0.05;

/// Default number of draws for the averaged shelving channel.
pub const DEFAULT_ORACLE_SAMPLES: usize = 1_000_000;

/// Parameters of the weak filter `ρ ↦ (p/4)(I + r·σ)ρ(I + r·σ) + (1 − p)ρ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    pub p: f64,
    pub r: [f64; 3],
}

impl FilterParams {
    pub fn new(p: f64, r: [f64; 3]) -> Result<Self> {
        let fp = Self { p, r };
        fp.validate()?;
        Ok(fp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidParameter(format!(
                "filter strength p = {} outside [0, 1]",
                self.p
            )));
        }
        let norm = self.r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > DEFAULT_TOL || !norm.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "filter direction has norm {norm}, expected 1"
            )));
        }
        Ok(())
    }

    /// `p` uniform on `[0, 0.05]`, `r` uniform on the unit sphere.
    pub fn sample(rng: &mut RandomStream) -> Self {
        let p = rng.uniform_in(0.0, FILTER_P_MAX);
        let r = rng.sphere_point();
        Self { p, r }
    }
}

/// `r · (X, Y, Z)`.
fn bloch_operator(r: &[f64; 3]) -> CMatrix {
    let [_, x, y, z] = paulis();
    x.scale(r[0]) + y.scale(r[1]) + z.scale(r[2])
}

/// Kraus form `{sqrt(p) (I + r·σ)/2, sqrt(1 − p) I}`.
pub fn filter_channel(fp: &FilterParams) -> Result<Channel> {
    fp.validate()?;
    let id = CMatrix::identity(2, 2);
    let proj = (&id + bloch_operator(&fp.r)).scale(0.5);
    let mut kraus = Vec::with_capacity(2);
    if fp.p > 0.0 {
        kraus.push(proj.scale(fp.p.sqrt()));
    }
    if fp.p < 1.0 {
        kraus.push(id.scale((1.0 - fp.p).sqrt()));
    }
    Channel::new(SpaceSpec::qubit(), kraus)
}

/// Filter noise for the Pauli set: one independently drawn channel per gate.
#[derive(Clone, Debug)]
pub struct FilterModel {
    pub params: Vec<FilterParams>,
}

impl FilterModel {
    pub fn new(params: Vec<FilterParams>) -> Result<Self> {
        for p in &params {
            p.validate()?;
        }
        Ok(Self { params })
    }

    pub fn assignment(&self) -> Result<NoiseAssignment> {
        Ok(NoiseAssignment::Fixed(
            self.params
                .iter()
                .map(filter_channel)
                .collect::<Result<_>>()?,
        ))
    }

    pub fn mean_p(&self) -> f64 {
        self.params.iter().map(|p| p.p).sum::<f64>() / self.params.len() as f64
    }

    /// `s_inc` of the average channel, `1 − mean(p)/2`.
    pub fn analytic_s_inc(&self) -> f64 {
        1.0 - 0.5 * self.mean_p()
    }
}

/// Four independent filter channels, one per Pauli.
pub fn sample_filter_model(rng: &mut RandomStream) -> FilterModel {
    FilterModel {
        params: (0..4).map(|_| FilterParams::sample(rng)).collect(),
    }
}

/// Shelving-noise parameters: code-space rotation angle and the standard
/// deviation of the shelving-angle error, both in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShelvingParams {
    pub phi: f64,
    pub sigma_gamma: f64,
}

impl Default for ShelvingParams {
    fn default() -> Self {
        Self {
            phi: 0.01,
            sigma_gamma: 0.06,
        }
    }
}

impl ShelvingParams {
    pub fn new(phi: f64, sigma_gamma: f64) -> Result<Self> {
        if !(sigma_gamma >= 0.0) || !phi.is_finite() || !sigma_gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "invalid shelving parameters phi = {phi}, sigma_gamma = {sigma_gamma}"
            )));
        }
        Ok(Self { phi, sigma_gamma })
    }
}

/// `V_γ = 1 ⊕ [[i sin γ, cos γ], [cos γ, i sin γ]]`.
pub fn shelving_v(gamma: f64) -> CMatrix {
    let (s, c) = gamma.sin_cos();
    let is = C64::new(0.0, s);
    let c = C64::new(c, 0.0);
    CMatrix::from_row_slice(3, 3, &[ONE, ZERO, ZERO, ZERO, is, c, ZERO, c, is])
}

/// `exp(iφ U X U†) ⊕ 1`, using `(U X U†)² = I`.
pub fn code_rotation(phi: f64, u: &CMatrix) -> Result<CMatrix> {
    if u.shape() != (2, 2) {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: u.nrows(),
        });
    }
    let dev = crate::liouville::unitarity_deviation(u);
    if dev > DEFAULT_TOL {
        return Err(Error::NonUnitary {
            index: 0,
            deviation: dev,
        });
    }
    let axis = u * &paulis()[1] * u.adjoint();
    let (s, c) = phi.sin_cos();
    let block = CMatrix::identity(2, 2).scale(c) + axis * C64::new(0.0, s);
    Ok(direct_sum(&block, &CMatrix::identity(1, 1)))
}

/// Haar-random unitary: QR of a complex Ginibre matrix with the phases fixed so
/// that the triangular factor has a positive real diagonal.
pub fn haar_unitary(dim: usize, rng: &mut RandomStream) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = CMatrix::from_fn(dim, dim, |_, _| {
        let re = rng.standard_normal();
        let im = rng.standard_normal();
        C64::new(re * s, im * s)
    });
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            ONE
        };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// One draw of `V_{γ2} δU_2 V_{γ1} δU_1` as a 3x3 unitary. Draw order is
/// `U_1, γ_1, U_2, γ_2`.
pub fn sample_coherent_unitary(sp: &ShelvingParams, rng: &mut RandomStream) -> CMatrix {
    let u1 = haar_unitary(2, rng);
    let g1 = rng.normal(0.0, sp.sigma_gamma);
    let u2 = haar_unitary(2, rng);
    let g2 = rng.normal(0.0, sp.sigma_gamma);
    let du1 = code_rotation(sp.phi, &u1).expect("Haar sample is unitary");
    let du2 = code_rotation(sp.phi, &u2).expect("Haar sample is unitary");
    shelving_v(g2) * du2 * shelving_v(g1) * du1
}

/// Single-Kraus unitary channel drawn from the shelving noise model.
pub fn sample_coherent_noise(sp: &ShelvingParams, rng: &mut RandomStream) -> Channel {
    Channel::unitary(SpaceSpec::qutrit_leak(), sample_coherent_unitary(sp, rng))
        .expect("3x3 unitary")
}

/// Sampler for the shelving noise model, redrawn after every gate.
#[derive(Clone, Copy, Debug)]
pub struct ShelvingSampler(pub ShelvingParams);

impl ChannelSampler for ShelvingSampler {
    fn space(&self) -> SpaceSpec {
        SpaceSpec::qutrit_leak()
    }

    fn sample(&self, rng: &mut RandomStream) -> Channel {
        sample_coherent_noise(&self.0, rng)
    }

    fn label(&self) -> String {
        format!(
            "shelving(phi={}, sigma_gamma={})",
            self.0.phi, self.0.sigma_gamma
        )
    }
}

pub fn shelving_assignment(sp: ShelvingParams) -> NoiseAssignment {
    NoiseAssignment::Stochastic(Arc::new(ShelvingSampler(sp)))
}

/// Monte Carlo estimate of the shelving channel averaged over its parameter
/// distributions.
pub fn averaged_coherent_channel(
    sp: &ShelvingParams,
    n_samples: usize,
    rng: &mut RandomStream,
) -> Result<Channel> {
    monte_carlo_channel(&ShelvingSampler(*sp), n_samples, rng)
}
