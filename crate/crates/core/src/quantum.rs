//! Two-qubit kernel: the singlet, partial trace, real rotation-basis
//! measurements, Born sampling and the partner-state projection used by the
//! Zig-Zag model.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontic::Outcome;

/// Normalization tolerance for states.
pub const NORM_TOLERANCE: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Outcome sign convention for the second wing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// Raw singlet statistics: equal angles give opposite outcomes.
    #[default]
    Singlet,
    /// Wing-B outcomes negated: equal angles give equal outcomes.
    CorrelatedPairs,
}

impl Convention {
    pub fn apply_b(self, outcome: Outcome) -> Outcome {
        match self {
            Convention::Singlet => outcome,
            Convention::CorrelatedPairs => outcome.negate(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Convention::Singlet => "singlet",
            Convention::CorrelatedPairs => "correlated-pairs",
        }
    }
}

impl std::str::FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "singlet" => Ok(Convention::Singlet),
            "correlated-pairs" => Ok(Convention::CorrelatedPairs),
            other => Err(Error::InvalidParameter(format!("unknown convention {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    amps: [Complex64; 2],
}

impl QubitState {
    pub fn new(a0: Complex64, a1: Complex64) -> Result<QubitState> {
        let n = a0.norm_sqr() + a1.norm_sqr();
        if !n.is_finite() || (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidState(format!("qubit norm² {n} is not 1")));
        }
        Ok(QubitState { amps: [a0, a1] })
    }

    pub fn from_parts(re0: f64, im0: f64, re1: f64, im1: f64) -> Result<QubitState> {
        QubitState::new(Complex64::new(re0, im0), Complex64::new(re1, im1))
    }

    /// Computational basis state `|k⟩`, `k ∈ {0, 1}`.
    pub fn basis(k: usize) -> QubitState {
        let one = Complex64::new(1.0, 0.0);
        if k == 0 {
            QubitState { amps: [one, ZERO] }
        } else {
            QubitState { amps: [ZERO, one] }
        }
    }

    /// The eigenstate of the rotation-basis observable at `angle` with the
    /// given outcome.
    pub fn eigenstate(angle: f64, outcome: Outcome) -> QubitState {
        let (s, c) = angle.sin_cos();
        let (x, y) = match outcome {
            Outcome::Plus => (c, s),
            Outcome::Minus => (-s, c),
        };
        QubitState {
            amps: [Complex64::new(x, 0.0), Complex64::new(y, 0.0)],
        }
    }

    pub fn amplitudes(&self) -> [Complex64; 2] {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps[0].norm_sqr() + self.amps[1].norm_sqr()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &QubitState) -> Complex64 {
        self.amps[0].conj() * other.amps[0] + self.amps[1].conj() * other.amps[1]
    }

    /// Multiplies by a real scalar (a global phase when `|s| = 1`).
    pub fn scaled(&self, s: f64) -> QubitState {
        QubitState {
            amps: [self.amps[0] * s, self.amps[1] * s],
        }
    }

    /// Removes the global phase so the first nonzero amplitude is positive real.
    pub fn phase_normalized(&self) -> QubitState {
        let lead = if self.amps[0].norm() > 1e-12 { self.amps[0] } else { self.amps[1] };
        if lead.norm() == 0.0 {
            return *self;
        }
        let phase = lead.conj() / lead.norm();
        let mut out = [self.amps[0] * phase, self.amps[1] * phase];
        for a in &mut out {
            if a.im.abs() < 1e-15 {
                a.im = 0.0;
            }
        }
        QubitState { amps: out }
    }

    pub fn density(&self) -> DensityMatrix {
        let [a, b] = self.amps;
        DensityMatrix {
            m: [[a * a.conj(), a * b.conj()], [b * a.conj(), b * b.conj()]],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitState {
    amps: [Complex64; 4],
}

impl TwoQubitState {
    /// Amplitudes ordered `|00⟩, |01⟩, |10⟩, |11⟩` (qubit 1 is the high bit).
    pub fn new(amps: [Complex64; 4]) -> Result<TwoQubitState> {
        let s = TwoQubitState { amps };
        let n = s.norm_sqr();
        if !n.is_finite() || (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidState(format!("two-qubit norm² {n} is not 1")));
        }
        Ok(s)
    }

    pub fn product(q1: &QubitState, q2: &QubitState) -> TwoQubitState {
        let [a0, a1] = q1.amps;
        let [b0, b1] = q2.amps;
        TwoQubitState {
            amps: [a0 * b0, a0 * b1, a1 * b0, a1 * b1],
        }
    }

    pub fn amplitudes(&self) -> [Complex64; 4] {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn swap_qubits(&self) -> TwoQubitState {
        let [a00, a01, a10, a11] = self.amps;
        TwoQubitState {
            amps: [a00, a10, a01, a11],
        }
    }

    fn amp(&self, i: usize, j: usize) -> Complex64 {
        self.amps[2 * i + j]
    }

    /// `|⟨e₁ ⊗ e₂|Ψ⟩|²`.
    pub fn product_probability(&self, e1: &QubitState, e2: &QubitState) -> f64 {
        let mut acc = ZERO;
        for i in 0..2 {
            for j in 0..2 {
                acc += e1.amps[i].conj() * e2.amps[j].conj() * self.amp(i, j);
            }
        }
        acc.norm_sqr()
    }
}

/// `(|0⟩|1⟩ − |1⟩|0⟩)/√2`.
pub fn make_singlet() -> TwoQubitState {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    TwoQubitState {
        amps: [ZERO, h, -h, ZERO],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    m: [[Complex64; 2]; 2],
}

impl DensityMatrix {
    pub fn maximally_mixed() -> DensityMatrix {
        let h = Complex64::new(0.5, 0.0);
        DensityMatrix { m: [[h, ZERO], [ZERO, h]] }
    }

    pub fn new(m: [[Complex64; 2]; 2]) -> Result<DensityMatrix> {
        let rho = DensityMatrix { m };
        rho.validate()?;
        Ok(rho)
    }

    /// Builds `[[r00, c], [c*, 1 − r00]]` with `c = re01 + i·im01`.
    pub fn from_bloch_entries(r00: f64, re01: f64, im01: f64) -> Result<DensityMatrix> {
        let c = Complex64::new(re01, im01);
        DensityMatrix::new([[Complex64::new(r00, 0.0), c], [c.conj(), Complex64::new(1.0 - r00, 0.0)]])
    }

    pub fn entries(&self) -> [[Complex64; 2]; 2] {
        self.m
    }

    pub fn trace(&self) -> Complex64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.m;
        if (m[0][1] - m[1][0].conj()).norm() > NORM_TOLERANCE
            || m[0][0].im.abs() > NORM_TOLERANCE
            || m[1][1].im.abs() > NORM_TOLERANCE
        {
            return Err(Error::InvalidState("density matrix is not Hermitian".into()));
        }
        if (self.trace() - 1.0).norm() > NORM_TOLERANCE {
            return Err(Error::InvalidState(format!("density matrix trace {} is not 1", self.trace())));
        }
        // 2×2 Hermitian with unit trace is PSD iff its determinant is ≥ 0.
        let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).re;
        if det < -NORM_TOLERANCE {
            return Err(Error::InvalidState("density matrix is not positive semidefinite".into()));
        }
        Ok(())
    }

    pub fn is_maximally_mixed(&self, tol: f64) -> bool {
        let mm = DensityMatrix::maximally_mixed();
        (0..2).all(|i| (0..2).all(|j| (self.m[i][j] - mm.m[i][j]).norm() <= tol))
    }

    /// `⟨e|ρ|e⟩`.
    pub fn expectation(&self, e: &QubitState) -> f64 {
        let mut acc = ZERO;
        for i in 0..2 {
            for j in 0..2 {
                acc += e.amps[i].conj() * self.m[i][j] * e.amps[j];
            }
        }
        acc.re
    }

    /// `U ρ U†` for the real rotation taking `|0⟩` to the angle-θ basis.
    pub fn rotated(&self, theta: f64) -> DensityMatrix {
        let (s, c) = theta.sin_cos();
        let u = [[c, -s], [s, c]];
        let mut out = [[ZERO; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                for k in 0..2 {
                    for l in 0..2 {
                        *cell += self.m[k][l] * (u[i][k] * u[j][l]);
                    }
                }
            }
        }
        DensityMatrix { m: out }
    }
}

/// Partial trace over qubit 2.
pub fn reduce_first(state: &TwoQubitState) -> Result<DensityMatrix> {
    let n = state.norm_sqr();
    if (n - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::InvalidState(format!("two-qubit norm² {n} is not 1")));
    }
    let mut m = [[ZERO; 2]; 2];
    for (i, row) in m.iter_mut().enumerate() {
        for (ip, cell) in row.iter_mut().enumerate() {
            for j in 0..2 {
                *cell += state.amp(i, j) * state.amp(ip, j).conj();
            }
        }
    }
    Ok(DensityMatrix { m })
}

/// Eigenstates for outcomes `(+1, −1)` of the observable at `angle`:
/// `(cosθ|0⟩ + sinθ|1⟩, −sinθ|0⟩ + cosθ|1⟩)`.
pub fn measurement_basis(angle: f64) -> (QubitState, QubitState) {
    (
        QubitState::eigenstate(angle, Outcome::Plus),
        QubitState::eigenstate(angle, Outcome::Minus),
    )
}

/// What [`born_sample`] can measure.
#[derive(Debug, Clone, Copy)]
pub enum LocalState<'a> {
    Pure(&'a QubitState),
    Mixed(&'a DensityMatrix),
}

impl<'a> From<&'a QubitState> for LocalState<'a> {
    fn from(s: &'a QubitState) -> Self {
        LocalState::Pure(s)
    }
}

impl<'a> From<&'a DensityMatrix> for LocalState<'a> {
    fn from(s: &'a DensityMatrix) -> Self {
        LocalState::Mixed(s)
    }
}

/// Probability of `+1` at `angle`.
pub fn born_probability_plus<'a>(state: impl Into<LocalState<'a>>, angle: f64) -> Result<f64> {
    let (plus, _) = measurement_basis(angle);
    let p = match state.into() {
        LocalState::Pure(psi) => {
            let n = psi.norm_sqr();
            if (n - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::InvalidState(format!("qubit norm² {n} is not 1")));
            }
            plus.inner(psi).norm_sqr()
        }
        LocalState::Mixed(rho) => {
            rho.validate()?;
            rho.expectation(&plus)
        }
    };
    Ok(p.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BornDraw {
    pub outcome: Outcome,
    /// `p(+1)` for the measured state and angle.
    pub p_plus: f64,
}

/// Born-rule measurement driven by an external uniform `randomness ∈ [0, 1)`:
/// the outcome is `+1` iff `randomness < p(+1)`.
pub fn born_sample<'a>(state: impl Into<LocalState<'a>>, angle: f64, randomness: f64) -> Result<BornDraw> {
    if !(0.0..1.0).contains(&randomness) {
        return Err(Error::InvalidParameter(format!("randomness {randomness} outside [0, 1)")));
    }
    let p_plus = born_probability_plus(state, angle)?;
    let outcome = if randomness < p_plus { Outcome::Plus } else { Outcome::Minus };
    Ok(BornDraw { outcome, p_plus })
}

/// Projects qubit 1 of `bell` onto Alice's outcome eigenstate and
/// renormalizes (the factor √2 for the singlet). The global phase is fixed
/// so the first nonzero amplitude is positive real.
pub fn partner_state(bell: &TwoQubitState, alice_angle: f64, alice_outcome: Outcome) -> Result<QubitState> {
    let k = QubitState::eigenstate(alice_angle, alice_outcome);
    let mut phi = [ZERO; 2];
    for (j, slot) in phi.iter_mut().enumerate() {
        for i in 0..2 {
            *slot += k.amps[i].conj() * bell.amp(i, j);
        }
    }
    let norm = (phi[0].norm_sqr() + phi[1].norm_sqr()).sqrt();
    if norm < 1e-12 {
        return Err(Error::InvalidState("partner projection has zero norm".into()));
    }
    Ok(QubitState {
        amps: [phi[0] / norm, phi[1] / norm],
    }
    .phase_normalized())
}

/// Singlet joint outcome probabilities `P(a, b | α, β)` by direct two-qubit
/// Born rule, indexed `[a][b]` with index 0 for `+1`.
pub fn singlet_joint_probabilities(alpha: f64, beta: f64, convention: Convention) -> [[f64; 2]; 2] {
    let psi = make_singlet();
    let mut out = [[0.0; 2]; 2];
    for (ia, a) in [Outcome::Plus, Outcome::Minus].into_iter().enumerate() {
        for (ib, b) in [Outcome::Plus, Outcome::Minus].into_iter().enumerate() {
            let p = psi.product_probability(&QubitState::eigenstate(alpha, a), &QubitState::eigenstate(beta, b));
            // The toggle relabels Bob's outcome.
            let jb = if convention == Convention::CorrelatedPairs { 1 - ib } else { ib };
            out[ia][jb] = p;
        }
    }
    out
}

pub(crate) fn outcome_index(o: Outcome) -> usize {
    match o {
        Outcome::Plus => 0,
        Outcome::Minus => 1,
    }
}

pub(crate) const OUTCOMES: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

/// `E(α, β) = −cos 2(α − β)` for the singlet, `+cos 2(α − β)` under the
/// correlated-pairs convention.
pub fn exact_correlator(alpha: f64, beta: f64, convention: Convention) -> f64 {
    let e = -(2.0 * (alpha - beta)).cos();
    match convention {
        Convention::Singlet => e,
        Convention::CorrelatedPairs => -e,
    }
}
