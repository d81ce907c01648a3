//! Nonlinear three-mass powertrain simulator with a backlash dead-zone in
//! the gear-mesh path, plus extraction of the linearized nominal model.
//!
//! Layout: the actuator mass `M_E` drives the intermediate gear mass `m_G`
//! through the spring/damper pair `(K_G, C_G)`; the mesh path `(K_D, C_D)`
//! couples `m_G` to the vehicle body `M_B`, with the elastic force acting on
//! the dead-zoned relative displacement and the mesh damping active only in
//! contact mode; `M_B` is grounded through `(K_C, C_C)`.

use crate::error::{Error, Result};
use crate::numerics::{c2d, Matrix};
use serde::{Deserialize, Serialize};

/// Physical parameters of the powertrain (the uncertainty vector).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantParams {
    pub m_e: f64,
    pub m_g: f64,
    pub m_b: f64,
    pub k_c: f64,
    pub k_g: f64,
    pub k_d: f64,
    pub c_c: f64,
    pub c_cl: f64,
    pub c_g: f64,
    pub c_d: f64,
    /// Total backlash width (m); the gap spans +-delta/2.
    pub delta: f64,
    pub backlash_enabled: bool,
}

impl Default for PlantParams {
    /// Nominal powertrain parameters.
    fn default() -> Self {
        PlantParams {
            m_e: 1.04,
            m_g: 0.039,
            m_b: 0.232,
            k_c: 660.0,
            k_g: 5.3e4,
            k_d: 2.2e4,
            c_c: 0.1,
            c_cl: 1.5,
            c_g: 36.0,
            c_d: 12.5,
            delta: 0.005,
            backlash_enabled: true,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<()> {
        if self.m_e <= 0.0 || self.m_g <= 0.0 || self.m_b <= 0.0 {
            return Err(Error::Precondition("masses must be positive".into()));
        }
        if self.k_c < 0.0 || self.k_g < 0.0 || self.k_d < 0.0 {
            return Err(Error::Precondition("stiffnesses must be >= 0".into()));
        }
        if self.c_c < 0.0 || self.c_cl < 0.0 || self.c_g < 0.0 || self.c_d < 0.0 {
            return Err(Error::Precondition("dampings must be >= 0".into()));
        }
        if self.delta < 0.0 {
            return Err(Error::Precondition("backlash width must be >= 0".into()));
        }
        Ok(())
    }
}

/// Positions and velocities of the three masses.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub x_e: f64,
    pub v_e: f64,
    pub x_g: f64,
    pub v_g: f64,
    pub x_b: f64,
    pub v_b: f64,
}

impl PlantState {
    pub fn to_vec(&self) -> [f64; 6] {
        [self.x_e, self.v_e, self.x_g, self.v_g, self.x_b, self.v_b]
    }

    pub fn from_vec(v: &[f64; 6]) -> Self {
        PlantState {
            x_e: v[0],
            v_e: v[1],
            x_g: v[2],
            v_g: v[3],
            x_b: v[4],
            v_b: v[5],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }
}

/// Piecewise step-force disturbance acting on the actuator mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Excitation {
    /// Strictly increasing step times (s).
    pub times: Vec<f64>,
    /// Force level (N) held from each step time until the next.
    pub levels: Vec<f64>,
}

impl Excitation {
    pub fn none() -> Self {
        Excitation {
            times: vec![],
            levels: vec![],
        }
    }

    /// Force at time t: the level of the last step at or before t.
    pub fn force(&self, t: f64) -> f64 {
        let mut f = 0.0;
        for (time, level) in self.times.iter().zip(self.levels.iter()) {
            if t >= *time {
                f = *level;
            } else {
                break;
            }
        }
        f
    }
}

/// Two-segment reference with critically damped second-order step shaping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceProfile {
    /// Steady level on [0, 2) s.
    pub seg1: f64,
    /// Steady level on [2, 4] s.
    pub seg2: f64,
    /// Shaping time constant (s).
    pub tau: f64,
}

impl Default for ReferenceProfile {
    fn default() -> Self {
        ReferenceProfile {
            seg1: -0.006,
            seg2: 0.0227,
            tau: 0.05,
        }
    }
}

/// Segment-2 transition time (s).
pub const SEGMENT_SWITCH_TIME: f64 = 2.0;

/// Reference signal at time t: shaped step 0 -> seg1 at t=0, seg1 -> seg2
/// at t=2 s. The critically damped shape converges to within 1% of the
/// target well before each segment ends for the default time constant.
pub fn reference(t: f64, r: &ReferenceProfile) -> f64 {
    if t < SEGMENT_SWITCH_TIME {
        shaped_step(t, 0.0, r.seg1, r.tau)
    } else {
        shaped_step(t - SEGMENT_SWITCH_TIME, r.seg1, r.seg2, r.tau)
    }
}

fn shaped_step(s: f64, from: f64, to: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return to;
    }
    let z = s / tau;
    to + (from - to) * (1.0 + z) * (-z).exp()
}

/// Symmetric dead-zone: zero inside the +-delta/2 gap, shifted-linear outside.
pub fn deadzone(rel_disp: f64, delta: f64) -> f64 {
    debug_assert!(delta >= 0.0);
    let half = delta / 2.0;
    if rel_disp > half {
        rel_disp - half
    } else if rel_disp < -half {
        rel_disp + half
    } else {
        0.0
    }
}

/// State derivative of the three-mass ODE under control force u and
/// disturbance force w, both applied to the actuator mass.
pub fn derivatives(s: &PlantState, u: f64, w: f64, p: &PlantParams) -> PlantState {
    // Coupling force pulling M_E toward m_G.
    let f_eg = p.k_g * (s.x_e - s.x_g) + p.c_g * (s.v_e - s.v_g);

    // Gear-mesh force transmitted from m_G to M_B.
    let rel = s.x_g - s.x_b;
    let f_mesh = if p.backlash_enabled {
        let deflection = deadzone(rel, p.delta);
        // Contact mode: outside the gap. A zero-width gap is always in
        // contact, which makes delta = 0 coincide with the linear plant.
        let in_contact = p.delta == 0.0 || rel.abs() > p.delta / 2.0;
        let damping = if in_contact {
            p.c_d * (s.v_g - s.v_b)
        } else {
            0.0
        };
        p.k_d * deflection + damping
    } else {
        p.k_d * rel + p.c_d * (s.v_g - s.v_b)
    };

    PlantState {
        x_e: s.v_e,
        v_e: (u + w - p.c_cl * s.v_e - f_eg) / p.m_e,
        x_g: s.v_g,
        v_g: (f_eg - f_mesh) / p.m_g,
        x_b: s.v_b,
        v_b: (f_mesh - p.k_c * s.x_b - p.c_c * s.v_b) / p.m_b,
    }
}

/// Substeps per sample; bounds the dead-zone event-crossing error without
/// event detection and keeps the backlash-free trajectory within 1e-6
/// cumulative output error of the exact discrete linear map over a 667-step
/// episode (measured: 2.4e-7 at 8 substeps, 3.9e-6 at 4).
pub const RK4_SUBSTEPS: usize = 8;

/// One zero-order-hold sample of length dt via classical RK4 substeps.
pub fn step(s: &PlantState, u: f64, w: f64, p: &PlantParams, dt: f64) -> Result<PlantState> {
    step_with_substeps(s, u, w, p, dt, RK4_SUBSTEPS)
}

pub fn step_with_substeps(
    s: &PlantState,
    u: f64,
    w: f64,
    p: &PlantParams,
    dt: f64,
    n_sub: usize,
) -> Result<PlantState> {
    let h = dt / n_sub as f64;
    let mut state = *s;
    for _ in 0..n_sub {
        state = rk4(&state, u, w, p, h);
    }
    if !state.is_finite() {
        return Err(Error::IntegrationFault { step: 0 });
    }
    Ok(state)
}

fn rk4(s: &PlantState, u: f64, w: f64, p: &PlantParams, h: f64) -> PlantState {
    let k1 = derivatives(s, u, w, p);
    let k2 = derivatives(&axpy(s, &k1, h / 2.0), u, w, p);
    let k3 = derivatives(&axpy(s, &k2, h / 2.0), u, w, p);
    let k4 = derivatives(&axpy(s, &k3, h), u, w, p);
    let mut out = s.to_vec();
    let (a, b, c, d) = (k1.to_vec(), k2.to_vec(), k3.to_vec(), k4.to_vec());
    for i in 0..6 {
        out[i] += h / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]);
    }
    PlantState::from_vec(&out)
}

fn axpy(s: &PlantState, k: &PlantState, h: f64) -> PlantState {
    let mut out = s.to_vec();
    let kv = k.to_vec();
    for i in 0..6 {
        out[i] += h * kv[i];
    }
    PlantState::from_vec(&out)
}

/// Controlled output: position of the vehicle body.
pub fn output(s: &PlantState) -> f64 {
    s.x_b
}

/// Total mechanical energy (kinetic plus spring potential, with the mesh
/// spring acting on the dead-zone deflection).
pub fn mechanical_energy(s: &PlantState, p: &PlantParams) -> f64 {
    let kinetic =
        0.5 * (p.m_e * s.v_e * s.v_e + p.m_g * s.v_g * s.v_g + p.m_b * s.v_b * s.v_b);
    let d_eg = s.x_e - s.x_g;
    let d_mesh = if p.backlash_enabled {
        deadzone(s.x_g - s.x_b, p.delta)
    } else {
        s.x_g - s.x_b
    };
    let potential =
        0.5 * (p.k_g * d_eg * d_eg + p.k_d * d_mesh * d_mesh + p.k_c * s.x_b * s.x_b);
    kinetic + potential
}

/// Discrete linearized nominal model (A, B1, B2, C): the dead-zone is
/// replaced by identity, the continuous ODE discretized by zero-order hold.
/// B1 is the disturbance input, B2 the control input (both force on M_E);
/// C selects the body position x_B.
pub fn linearize_nominal(p: &PlantParams, dt: f64) -> (Matrix, Matrix, Matrix, Matrix) {
    let a_cont = continuous_a(p);
    let mut b_cont = Matrix::zeros(6, 2);
    b_cont[(1, 0)] = 1.0 / p.m_e; // disturbance w
    b_cont[(1, 1)] = 1.0 / p.m_e; // control u
    let (a_d, b_d) = c2d(&a_cont, &b_cont, dt);
    let b1 = b_d.block(0, 0, 6, 1);
    let b2 = b_d.block(0, 1, 6, 1);
    let mut c = Matrix::zeros(1, 6);
    c[(0, 4)] = 1.0;
    (a_d, b1, b2, c)
}

/// Continuous-time system matrix of the backlash-free plant.
fn continuous_a(p: &PlantParams) -> Matrix {
    let mut a = Matrix::zeros(6, 6);
    // x_e' = v_e
    a[(0, 1)] = 1.0;
    // v_e' = (-c_cl v_e - k_g (x_e - x_g) - c_g (v_e - v_g)) / m_e
    a[(1, 0)] = -p.k_g / p.m_e;
    a[(1, 1)] = -(p.c_cl + p.c_g) / p.m_e;
    a[(1, 2)] = p.k_g / p.m_e;
    a[(1, 3)] = p.c_g / p.m_e;
    // x_g' = v_g
    a[(2, 3)] = 1.0;
    // v_g' = (k_g (x_e - x_g) + c_g (v_e - v_g) - k_d (x_g - x_b) - c_d (v_g - v_b)) / m_g
    a[(3, 0)] = p.k_g / p.m_g;
    a[(3, 1)] = p.c_g / p.m_g;
    a[(3, 2)] = -(p.k_g + p.k_d) / p.m_g;
    a[(3, 3)] = -(p.c_g + p.c_d) / p.m_g;
    a[(3, 4)] = p.k_d / p.m_g;
    a[(3, 5)] = p.c_d / p.m_g;
    // x_b' = v_b
    a[(4, 5)] = 1.0;
    // v_b' = (k_d (x_g - x_b) + c_d (v_g - v_b) - k_c x_b - c_c v_b) / m_b
    a[(5, 2)] = p.k_d / p.m_b;
    a[(5, 3)] = p.c_d / p.m_b;
    a[(5, 4)] = -(p.k_d + p.k_c) / p.m_b;
    a[(5, 5)] = -(p.c_d + p.c_c) / p.m_b;
    a
}

/// Steady-state output per unit constant force on M_E (continuous DC gain):
/// at rest the force path sees the series springs, so y_ss = f / K_C.
/// Exposed for excitation construction; the discrete DC gain of the
/// linearized model matches it.
pub fn dc_gain_to_body(p: &PlantParams) -> f64 {
    1.0 / p.k_c
}
