//! Parameter and state types for the SQCIR system, plus the right-hand
//! sides of the reduced (single-region) and networked (mobility-coupled)
//! models as pure functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The seven rate constants of the SQCIR system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Recruitment rate Λ (individuals per unit time).
    pub lambda: f64,
    /// Quarantine contact rate α (1 / (individuals · time)).
    pub alpha: f64,
    /// Baseline contact rate ε at M = 0 (1 / (individuals · time)).
    #[serde(rename = "epsilon")]
    pub epsilon0: f64,
    /// Infection contact rate δ (1 / (individuals · time)).
    pub delta: f64,
    /// Direct recovery rate of contacted individuals μ (1 / time).
    pub mu: f64,
    /// Recovery rate of infected individuals ν (1 / time).
    pub nu: f64,
    /// Emigration rate Φ (1 / time).
    pub phi: f64,
}

impl ModelParams {
    pub fn new(
        lambda: f64,
        alpha: f64,
        epsilon0: f64,
        delta: f64,
        mu: f64,
        nu: f64,
        phi: f64,
    ) -> Result<Self> {
        let p = Self {
            lambda,
            alpha,
            epsilon0,
            delta,
            mu,
            nu,
            phi,
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks the basic parameter invariants: everything finite and
    /// nonnegative, and `phi > 0` (it divides several closed forms).
    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.named_fields() {
            if !v.is_finite() {
                return Err(Error::InvalidParameters(format!("{name} is not finite")));
            }
            if v < 0.0 {
                return Err(Error::InvalidParameters(format!(
                    "{name} must be >= 0, got {v}"
                )));
            }
        }
        if self.phi <= 0.0 {
            return Err(Error::InvalidParameters(format!(
                "phi must be > 0, got {}",
                self.phi
            )));
        }
        Ok(())
    }

    pub fn named_fields(&self) -> [(&'static str, f64); 7] {
        [
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("epsilon", self.epsilon0),
            ("delta", self.delta),
            ("mu", self.mu),
            ("nu", self.nu),
            ("phi", self.phi),
        ]
    }

    /// Carrying value Λ/Φ, the upper bound on the total population in Σ.
    pub fn carrying_capacity(&self) -> f64 {
        self.lambda / self.phi
    }
}

/// One region's compartment occupancies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateVector {
    /// Susceptible: not yet encountered the mob.
    pub s: f64,
    /// Quarantined: suspicious or media-influenced, temporarily not spreading.
    pub q: f64,
    /// Contacted: encountered the mob but not actively spreading.
    pub c: f64,
    /// Infected: actively spreading.
    pub i: f64,
    /// Recovered: no longer spreading.
    pub r: f64,
}

impl StateVector {
    pub const ZERO: Self = Self {
        s: 0.0,
        q: 0.0,
        c: 0.0,
        i: 0.0,
        r: 0.0,
    };

    pub fn new(s: f64, q: f64, c: f64, i: f64, r: f64) -> Self {
        Self { s, q, c, i, r }
    }

    pub fn total_population(&self) -> f64 {
        self.s + self.q + self.c + self.i + self.r
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.s, self.q, self.c, self.i, self.r]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    pub fn is_nonnegative(&self) -> bool {
        self.as_array().iter().all(|&v| v >= 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|&v| v.is_finite())
    }

    pub const COMPONENT_NAMES: [&'static str; 5] = ["S", "Q", "C", "I", "R"];
}

/// Mobility-coupled model description: per-region rate constants plus the
/// matrix of travel rates. `t_matrix[i][j]` is the rate of leaving region
/// `i` toward region `j`; diagonal entries must be zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub t_matrix: Vec<Vec<f64>>,
    pub per_region: Vec<ModelParams>,
}

impl NetworkParams {
    pub fn new(t_matrix: Vec<Vec<f64>>, per_region: Vec<ModelParams>) -> Result<Self> {
        let net = Self {
            t_matrix,
            per_region,
        };
        net.validate()?;
        Ok(net)
    }

    /// Region count.
    pub fn k(&self) -> usize {
        self.per_region.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 {
            return Err(Error::InvalidParameters(
                "network needs at least one region".into(),
            ));
        }
        if self.t_matrix.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "t_matrix has {} rows for {k} regions",
                self.t_matrix.len()
            )));
        }
        for (i, row) in self.t_matrix.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch(format!(
                    "t_matrix row {i} has {} entries for {k} regions",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidParameters(format!(
                        "t_matrix[{i}][{j}] must be finite and >= 0, got {v}"
                    )));
                }
                if i == j && v != 0.0 {
                    return Err(Error::InvalidParameters(format!(
                        "t_matrix diagonal entry [{i}][{i}] must be 0, got {v}"
                    )));
                }
            }
        }
        for p in &self.per_region {
            p.validate()?;
        }
        Ok(())
    }

    /// Total outflow rate from region `i`, i.e. the row sum of `t_matrix`.
    pub fn outflow_rate(&self, i: usize) -> f64 {
        self.t_matrix[i].iter().sum()
    }
}

/// Compartment occupancies of every region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub regions: Vec<StateVector>,
}

impl NetworkState {
    pub fn new(regions: Vec<StateVector>) -> Self {
        Self { regions }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.regions.iter().all(StateVector::is_nonnegative)
    }

    pub fn is_finite(&self) -> bool {
        self.regions.iter().all(StateVector::is_finite)
    }

    /// Sum of every compartment over every region.
    pub fn total_population(&self) -> f64 {
        self.regions.iter().map(StateVector::total_population).sum()
    }
}

/// Raw right-hand side of the reduced system; no input validation.
///
/// The contact rate enters as an explicit argument so the same function
/// serves constant-rate and mob-modulated runs. The componentwise sum of
/// the result is Λ − Φ·N by construction: every bilinear term appears
/// once with each sign.
pub(crate) fn rhs_reduced(state: &StateVector, p: &ModelParams, epsilon_t: f64) -> StateVector {
    let StateVector { s, q, c, i, r } = *state;
    StateVector {
        s: p.lambda - p.alpha * s * q - epsilon_t * s * c - p.phi * s,
        q: p.alpha * s * q - epsilon_t * q * c - p.phi * q,
        c: epsilon_t * s * c + epsilon_t * q * c - p.delta * c * i - p.mu * c - p.phi * c,
        i: p.delta * c * i - p.nu * i - p.phi * i,
        r: p.mu * c + p.nu * i - p.phi * r,
    }
}

/// Evaluates the reduced system's right-hand side at `state` with the
/// contact rate `epsilon_t`.
pub fn derivative_reduced(
    state: &StateVector,
    params: &ModelParams,
    epsilon_t: f64,
) -> Result<StateVector> {
    if !state.is_finite() {
        return Err(Error::InvalidInput(
            "state has a non-finite component".into(),
        ));
    }
    if !epsilon_t.is_finite() {
        return Err(Error::InvalidInput(format!(
            "epsilon_t must be finite, got {epsilon_t}"
        )));
    }
    Ok(rhs_reduced(state, params, epsilon_t))
}

/// Raw right-hand side of the networked system; no input validation.
///
/// Per region: the reduced terms plus inflow Σ_j T_ji X_j minus outflow
/// (Σ_j T_ij) X_i, applied to every compartment X. The inflow/outflow
/// terms cancel pairwise when any compartment's rate is summed over
/// regions.
pub(crate) fn rhs_network(
    state: &NetworkState,
    net: &NetworkParams,
    epsilon_t: f64,
) -> NetworkState {
    let k = net.k();
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let local = rhs_reduced(&state.regions[i], &net.per_region[i], epsilon_t);
        let mut inflow = [0.0f64; 5];
        for j in 0..k {
            if j == i {
                continue;
            }
            let t_ji = net.t_matrix[j][i];
            let xj = state.regions[j].as_array();
            for (acc, x) in inflow.iter_mut().zip(xj) {
                *acc += t_ji * x;
            }
        }
        let outflow_rate = net.outflow_rate(i);
        let xi = state.regions[i].as_array();
        let loc = local.as_array();
        let mut d = [0.0f64; 5];
        for c in 0..5 {
            d[c] = loc[c] + inflow[c] - outflow_rate * xi[c];
        }
        out.push(StateVector::from_array(d));
    }
    NetworkState::new(out)
}

/// Evaluates the networked system's right-hand side.
pub fn derivative_network(
    state: &NetworkState,
    net: &NetworkParams,
    epsilon_t: f64,
) -> Result<NetworkState> {
    if state.regions.len() != net.k() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} regions, network has {}",
            state.regions.len(),
            net.k()
        )));
    }
    if !state.is_finite() {
        return Err(Error::InvalidInput(
            "state has a non-finite component".into(),
        ));
    }
    if !epsilon_t.is_finite() {
        return Err(Error::InvalidInput(format!(
            "epsilon_t must be finite, got {epsilon_t}"
        )));
    }
    Ok(rhs_network(state, net, epsilon_t))
}

/// Exact component sum S + Q + C + I + R.
pub fn total_population(state: &StateVector) -> f64 {
    state.total_population()
}

/// Membership test for the positively invariant region Σ: all components
/// nonnegative and 0 < N ≤ Λ/Φ.
pub fn in_invariant_region(state: &StateVector, params: &ModelParams) -> bool {
    let n = state.total_population();
    state.is_nonnegative() && n > 0.0 && n <= params.carrying_capacity()
}
