//! Equations of motion for the three test problems: inertial two-body,
//! the circular restricted three-body problem in the synodic frame, and 3DOF
//! atmospheric flight with an exponential atmosphere.
//!
//! Every right-hand side is written once against [`Scalar`] so the same code
//! evaluates plain states and Taylor jets. Integration happens in
//! nondimensional units; [`Model`] owns the scaling between the two.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jets::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoBodyParams {
    /// Gravitational parameter, in the units of the state it is applied to.
    pub mu: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cr3bpParams {
    pub mu_star: f64,
}

/// Dimensional aerocapture constants as they appear in a scenario file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AerocaptureParams {
    pub lift_to_drag: f64,
    /// kg/m²
    pub ballistic_coeff: f64,
    /// deg
    pub bank_angle: f64,
    /// rad/s
    pub omega_planet: f64,
    /// km
    pub radius_planet: f64,
    /// km³/s²
    pub mu_planet: f64,
    /// Zero disables oblateness.
    pub j2: f64,
    /// kg/m³
    pub rho0: f64,
    /// km
    pub h0: f64,
    /// km
    pub scale_height: f64,
    /// kg/m³; density unit of the nondimensional log-density state.
    #[serde(rename = "mref_over_Rp3")]
    pub mref_over_rp3: f64,
}

impl AerocaptureParams {
    /// Uranus values. Gravity and rotation follow the JPL ura111 satellite
    /// solution (GM, equatorial radius, J2 at that radius, 17.24 h sidereal
    /// rotation); atmosphere, vehicle and bank angle are the scenario values.
    pub fn uranus() -> Self {
        Self {
            lift_to_drag: 0.25,
            ballistic_coeff: 145.0,
            bank_angle: 78.0,
            omega_planet: 1.012_37e-4,
            radius_planet: 25_559.0,
            mu_planet: 5_793_951.3,
            j2: 3.510_68e-3,
            rho0: 6.40e-3,
            h0: 0.0,
            scale_height: 54.72,
            mref_over_rp3: 20.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.scale_height > 0.0, "scale_height must be positive"),
            (self.rho0 > 0.0, "rho0 must be positive"),
            (self.ballistic_coeff > 0.0, "ballistic_coeff must be positive"),
            (self.radius_planet > 0.0, "radius_planet must be positive"),
            (self.mu_planet > 0.0, "mu_planet must be positive"),
            (self.mref_over_rp3 > 0.0, "mref_over_Rp3 must be positive"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::Config(msg.into()));
            }
        }
        Ok(())
    }

    /// Surface gravity `μ / R_p²`, km/s².
    pub fn g0(&self) -> f64 {
        self.mu_planet / (self.radius_planet * self.radius_planet)
    }

    /// Velocity unit `sqrt(g0 R_p)`, km/s.
    pub fn velocity_unit(&self) -> f64 {
        (self.g0() * self.radius_planet).sqrt()
    }

    /// Time unit `sqrt(R_p / g0)`, s.
    pub fn time_unit(&self) -> f64 {
        (self.radius_planet / self.g0()).sqrt()
    }

    /// Constants of the nondimensional equations of motion.
    pub fn coefficients(&self) -> AeroCoefficients {
        let sigma = self.bank_angle.to_radians();
        // D = ρ V² / (2β) in SI; scaled by g0 with V² = g0 R_p this leaves
        // ρ* V*² ρ_ref R_p[m] / (2β).
        let drag_k = 0.5 * self.mref_over_rp3 * self.radius_planet * 1e3 / self.ballistic_coeff;
        AeroCoefficients {
            drag_k,
            lift_to_drag: self.lift_to_drag,
            cos_bank: sigma.cos(),
            sin_bank: sigma.sin(),
            omega: self.omega_planet * self.time_unit(),
            j2: self.j2,
            scale_height: self.scale_height / self.radius_planet,
        }
    }
}

/// Nondimensional constants entering the aerocapture rates (μ = R_p = 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AeroCoefficients {
    /// Drag acceleration is `drag_k * exp(ln ρ*) * V²`.
    pub drag_k: f64,
    pub lift_to_drag: f64,
    pub cos_bank: f64,
    pub sin_bank: f64,
    pub omega: f64,
    pub j2: f64,
    pub scale_height: f64,
}

/// `[v; -μ r / |r|³]`.
pub fn eval_two_body<S: Scalar>(x: &[S], p: &TwoBodyParams) -> Vec<S> {
    let r2 = x[0].clone() * &x[0] + x[1].clone() * &x[1] + x[2].clone() * &x[2];
    let k = r2.powf(-1.5) * (-p.mu);
    vec![
        x[3].clone(),
        x[4].clone(),
        x[5].clone(),
        k.clone() * &x[0],
        k.clone() * &x[1],
        k * &x[2],
    ]
}

/// Effective-potential gradient and the Coriolis terms in the rotating frame,
/// primaries at `(-μ*, 0, 0)` and `(1 - μ*, 0, 0)`.
pub fn eval_cr3bp<S: Scalar>(x: &[S], p: &Cr3bpParams) -> Vec<S> {
    let mu = p.mu_star;
    let yz2 = x[1].clone() * &x[1] + x[2].clone() * &x[2];
    let d1 = x[0].clone() + mu;
    let d2 = x[0].clone() + (mu - 1.0);
    let r1_sq = d1.clone() * &d1 + &yz2;
    let r2_sq = d2.clone() * &d2 + &yz2;
    let k1 = r1_sq.powf(-1.5) * (1.0 - mu);
    let k2 = r2_sq.powf(-1.5) * mu;
    let ksum = k1.clone() + &k2;
    let ux = x[0].clone() - k1 * &d1 - k2 * &d2;
    let uy = x[1].clone() - ksum.clone() * &x[1];
    let uz = -(ksum * &x[2]);
    vec![
        x[3].clone(),
        x[4].clone(),
        x[5].clone(),
        x[4].clone() * 2.0 + ux,
        uy - x[3].clone() * 2.0,
        uz,
    ]
}

/// Radial and latitudinal gravity components with J2 (μ = R_p = 1).
fn gravity<S: Scalar>(r: &S, sin_phi: &S, cos_phi: &S, j2: f64) -> (S, S) {
    let inv_r2 = r.powf(-2.0);
    if j2 == 0.0 {
        return (inv_r2.clone(), inv_r2 * 0.0);
    }
    let inv_r4 = inv_r2.clone() * &inv_r2;
    let s2 = sin_phi.clone() * sin_phi;
    let g_r = inv_r2.clone() + inv_r4.clone() * (s2 * (-3.0) + 1.0) * (1.5 * j2);
    let g_phi = inv_r4 * sin_phi.clone() * cos_phi * (3.0 * j2);
    (g_r, g_phi)
}

/// The seven rates of `[r, θ, φ, V, γ, ψ, ln ρ*]` in nondimensional form.
pub fn eval_aerocapture<S: Scalar>(x: &[S], c: &AeroCoefficients) -> Vec<S> {
    let r = &x[0];
    let v = &x[3];
    let (sin_phi, cos_phi) = (x[2].sin(), x[2].cos());
    let (sin_g, cos_g) = (x[4].sin(), x[4].cos());
    let (sin_psi, cos_psi) = (x[5].sin(), x[5].cos());
    let tan_g = x[4].tan();
    let tan_phi = x[2].tan();
    let rho = x[6].exp();
    let om = c.omega;

    let drag = rho * v * v * c.drag_k;
    let lift = drag.clone() * c.lift_to_drag;
    let (g_r, g_phi) = gravity(r, &sin_phi, &cos_phi, c.j2);

    let v_sin_g = v.clone() * &sin_g;
    let r_dot = v_sin_g.clone();
    let theta_dot = v.clone() * &cos_g * &sin_psi / (r.clone() * &cos_phi);
    let phi_dot = v.clone() * &cos_g * &cos_psi / r;

    let om2_r_cphi = r.clone() * &cos_phi * (om * om);
    let v_dot = -drag
        - g_r.clone() * &sin_g
        - g_phi.clone() * &cos_g * &cos_phi
        + om2_r_cphi.clone()
            * (sin_g.clone() * &cos_phi - cos_g.clone() * &sin_phi * &cos_psi);

    let v_over_r = v.clone() / r;
    let gamma_bracket = lift.clone() * c.cos_bank
        + (v_over_r.clone() * v - &g_r) * &cos_g
        + g_phi.clone() * &sin_g * &cos_psi
        + v.clone() * &cos_phi * &sin_psi * (2.0 * om)
        + om2_r_cphi.clone() * (cos_g.clone() * &cos_phi + sin_g.clone() * &cos_psi * &sin_phi);
    let gamma_dot = gamma_bracket / v;

    let psi_bracket = lift * c.sin_bank / &cos_g
        + v_over_r * v * &cos_g * &sin_psi * &tan_phi
        + g_phi * &sin_psi / &cos_g
        - v.clone() * (tan_g * &cos_psi * &cos_phi - &sin_phi) * (2.0 * om)
        + om2_r_cphi / &cos_g * &sin_psi * &sin_phi;
    let psi_dot = psi_bracket / v;

    let ln_rho_dot = v_sin_g * (-1.0 / c.scale_height);

    vec![r_dot, theta_dot, phi_dot, v_dot, gamma_dot, psi_dot, ln_rho_dot]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    Dimensional,
    Nondimensional,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub values: DVector<f64>,
    pub units: Units,
}

impl StateVector {
    pub fn nondimensional(values: DVector<f64>) -> Self {
        Self {
            values,
            units: Units::Nondimensional,
        }
    }

    pub fn dimensional(values: DVector<f64>) -> Self {
        Self {
            values,
            units: Units::Dimensional,
        }
    }
}

/// Earth–Moon synodic units used when a CR3BP state is reported dimensionally.
pub const EARTH_MOON_DISTANCE_KM: f64 = 384_400.0;
pub const EARTH_MOON_TIME_UNIT_S: f64 = 375_190.258_9;

/// A dynamics model in nondimensional form together with its unit scaling.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    /// Canonical units: length `distance_unit` km, μ = 1.
    TwoBody {
        params: TwoBodyParams,
        distance_unit: f64,
    },
    Cr3bp {
        params: Cr3bpParams,
        distance_unit: f64,
        time_unit: f64,
    },
    Aerocapture {
        params: AerocaptureParams,
        coeffs: AeroCoefficients,
    },
}

impl Model {
    pub fn two_body(params: TwoBodyParams, distance_unit: f64) -> Result<Self> {
        if !(params.mu > 0.0) || !(distance_unit > 0.0) {
            return Err(Error::Config("two-body mu and distance unit must be positive".into()));
        }
        Ok(Model::TwoBody {
            params,
            distance_unit,
        })
    }

    pub fn cr3bp(params: Cr3bpParams) -> Result<Self> {
        if !(params.mu_star >= 0.0 && params.mu_star < 0.5) {
            return Err(Error::Config(format!(
                "mu_star {} outside [0, 1/2)",
                params.mu_star
            )));
        }
        Ok(Model::Cr3bp {
            params,
            distance_unit: EARTH_MOON_DISTANCE_KM,
            time_unit: EARTH_MOON_TIME_UNIT_S,
        })
    }

    pub fn aerocapture(params: AerocaptureParams) -> Result<Self> {
        params.validate()?;
        Ok(Model::Aerocapture {
            coeffs: params.coefficients(),
            params,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::TwoBody { .. } => "two_body",
            Model::Cr3bp { .. } => "cr3bp",
            Model::Aerocapture { .. } => "aerocapture",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Model::TwoBody { .. } | Model::Cr3bp { .. } => 6,
            Model::Aerocapture { .. } => 7,
        }
    }

    /// Nondimensional right-hand side.
    pub fn rhs<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        match self {
            Model::TwoBody { .. } => eval_two_body(x, &TwoBodyParams { mu: 1.0 }),
            Model::Cr3bp { params, .. } => eval_cr3bp(x, params),
            Model::Aerocapture { coeffs, .. } => eval_aerocapture(x, coeffs),
        }
    }

    /// Preconditions of the nondimensional right-hand side.
    pub fn check_domain(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "{} state has {} components, got {}",
                self.name(),
                self.dim(),
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite state".into()));
        }
        match self {
            Model::TwoBody { .. } => {
                if x[..3].iter().all(|&c| c == 0.0) {
                    return Err(Error::Domain("two-body singularity at r = 0".into()));
                }
            }
            Model::Cr3bp { params, .. } => {
                let mu = params.mu_star;
                let yz2 = x[1] * x[1] + x[2] * x[2];
                let r1 = ((x[0] + mu).powi(2) + yz2).sqrt();
                let r2 = ((x[0] - 1.0 + mu).powi(2) + yz2).sqrt();
                if r1 == 0.0 || (mu > 0.0 && r2 == 0.0) {
                    return Err(Error::Domain("CR3BP state at a primary".into()));
                }
            }
            Model::Aerocapture { .. } => {
                if x[0] <= 1.0 {
                    return Err(Error::Domain(format!(
                        "radius {} is below the planet surface",
                        x[0]
                    )));
                }
                if x[3] <= 0.0 {
                    return Err(Error::Domain("velocity must be positive".into()));
                }
                if x[4].cos() <= 0.0 {
                    return Err(Error::Domain("flight path angle reached ±90°".into()));
                }
                if x[2].cos() == 0.0 {
                    return Err(Error::Domain("state at a pole".into()));
                }
            }
        }
        Ok(())
    }

    /// Checked plain evaluation.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_domain(x)?;
        Ok(self.rhs(x))
    }

    /// Time unit in seconds.
    pub fn time_unit(&self) -> f64 {
        match self {
            Model::TwoBody {
                params,
                distance_unit,
            } => (distance_unit.powi(3) / params.mu).sqrt(),
            Model::Cr3bp { time_unit, .. } => *time_unit,
            Model::Aerocapture { params, .. } => params.time_unit(),
        }
    }

    /// Per-component factors: dimensional = nondimensional * factor (plus the
    /// aerocapture log-density offset, see [`dimensionalize`](Self::dimensionalize)).
    fn component_scales(&self) -> Vec<f64> {
        match self {
            Model::TwoBody { distance_unit, .. } | Model::Cr3bp { distance_unit, .. } => {
                let v = distance_unit / self.time_unit();
                vec![*distance_unit, *distance_unit, *distance_unit, v, v, v]
            }
            Model::Aerocapture { params, .. } => {
                let deg = 1f64.to_degrees();
                vec![
                    params.radius_planet,
                    deg,
                    deg,
                    params.velocity_unit(),
                    deg,
                    deg,
                    1.0,
                ]
            }
        }
    }

    fn ln_rho_offset(&self) -> f64 {
        match self {
            Model::Aerocapture { params, .. } => params.mref_over_rp3.ln(),
            _ => 0.0,
        }
    }

    /// Dimensional state to nondimensional. Aerocapture states are
    /// `[r km, θ deg, φ deg, V km/s, γ deg, ψ deg, ln ρ (kg/m³)]`; the
    /// others are `[km, km/s]`. Already-nondimensional input is returned as is.
    pub fn nondimensionalize(&self, x: &StateVector) -> StateVector {
        if x.units == Units::Nondimensional {
            return x.clone();
        }
        let scales = self.component_scales();
        let mut out = x.values.component_div(&DVector::from_vec(scales));
        if let Model::Aerocapture { .. } = self {
            out[6] = x.values[6] - self.ln_rho_offset();
        }
        StateVector::nondimensional(out)
    }

    pub fn dimensionalize(&self, x: &StateVector) -> StateVector {
        if x.units == Units::Dimensional {
            return x.clone();
        }
        let scales = self.component_scales();
        let mut out = x.values.component_mul(&DVector::from_vec(scales));
        if let Model::Aerocapture { .. } = self {
            out[6] = x.values[6] + self.ln_rho_offset();
        }
        StateVector::dimensional(out)
    }

    /// Scale factors mapping nondimensional perturbations to dimensional ones
    /// (the log-density offset cancels in differences).
    pub fn perturbation_scales(&self) -> Vec<f64> {
        self.component_scales()
    }
}

/// Specific orbital energy `v²/2 - μ/r`.
pub fn two_body_energy(x: &[f64], mu: f64) -> f64 {
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    0.5 * (x[3] * x[3] + x[4] * x[4] + x[5] * x[5]) - mu / r
}

/// Specific angular momentum `r × v`.
pub fn two_body_angular_momentum(x: &[f64]) -> [f64; 3] {
    [
        x[1] * x[5] - x[2] * x[4],
        x[2] * x[3] - x[0] * x[5],
        x[0] * x[4] - x[1] * x[3],
    ]
}

/// Jacobi constant `2Ū - v²`.
pub fn jacobi_constant(x: &[f64], mu: f64) -> f64 {
    let yz2 = x[1] * x[1] + x[2] * x[2];
    let r1 = ((x[0] + mu).powi(2) + yz2).sqrt();
    let r2 = ((x[0] - 1.0 + mu).powi(2) + yz2).sqrt();
    let u = (1.0 - mu) / r1 + mu / r2 + 0.5 * (x[0] * x[0] + x[1] * x[1]);
    2.0 * u - (x[3] * x[3] + x[4] * x[4] + x[5] * x[5])
}
