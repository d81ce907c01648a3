//! Model-based linear controller: discrete LQG (H2-equivalent) synthesis
//! with integral augmentation for offset-free tracking, run in the
//! error-feedback state-space form plus a DC-inversion feedforward.

use crate::error::{Error, Result};
use crate::numerics::{dare_solve, lqr_gain, spectral_radius, Matrix};
use crate::textdoc::TextDoc;

/// Nominal discrete model (A, B1, B2, C).
pub type NominalModel = (Matrix, Matrix, Matrix, Matrix);

/// Discrete state-space controller with internal state, driven by the
/// tracking error e and producing the model-based control input.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSS {
    pub a_c: Matrix,
    pub b_c: Matrix,
    pub c_c: Matrix,
    pub d_c: Matrix,
    pub x_c: Vec<f64>,
    /// Feedforward gain: u_ff = u_ff_gain * y_r.
    pub u_ff_gain: f64,
}

impl ControllerSS {
    /// Reset the internal state to zero.
    pub fn reset(&mut self) {
        self.x_c.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn state_dim(&self) -> usize {
        self.x_c.len()
    }

    /// Output the controller would produce for error e, without advancing.
    pub fn peek(&self, e: f64) -> f64 {
        dot(self.c_c.row(0), &self.x_c) + self.d_c[(0, 0)] * e
    }

    /// One controller step: u = C_c x_c + D_c e, then advance the state.
    /// The feedforward term is added by the caller.
    pub fn step(&mut self, e: f64) -> f64 {
        let u = self.peek(e);
        let mut next = self.a_c.matvec(&self.x_c);
        for (i, n) in next.iter_mut().enumerate() {
            *n += self.b_c[(i, 0)] * e;
        }
        self.x_c = next;
        u
    }

    pub fn feedforward(&self, y_r: f64) -> f64 {
        self.u_ff_gain * y_r
    }

    pub fn to_doc(&self) -> TextDoc {
        let mut doc = TextDoc::new("controller");
        doc.push_meta("format", "1");
        doc.push_scalar("u_ff_gain", self.u_ff_gain);
        doc.push_tensor("a_c", self.a_c.clone());
        doc.push_tensor("b_c", self.b_c.clone());
        doc.push_tensor("c_c", self.c_c.clone());
        doc.push_tensor("d_c", self.d_c.clone());
        doc.push_tensor(
            "x_c",
            Matrix::from_vec(self.x_c.len(), 1, self.x_c.clone()),
        );
        doc
    }

    pub fn from_doc(doc: &TextDoc) -> Result<ControllerSS> {
        if doc.kind != "controller" {
            return Err(Error::Parse(format!(
                "expected controller document, got '{}'",
                doc.kind
            )));
        }
        Ok(ControllerSS {
            a_c: doc.tensor("a_c")?.clone(),
            b_c: doc.tensor("b_c")?.clone(),
            c_c: doc.tensor("c_c")?.clone(),
            d_c: doc.tensor("d_c")?.clone(),
            x_c: doc.tensor("x_c")?.data().to_vec(),
            u_ff_gain: doc.scalar("u_ff_gain")?,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Tuning weights for the LQG design.
#[derive(Debug, Clone)]
pub struct SynthesisSpec {
    /// State weight (PSD, n x n).
    pub state_weight: Matrix,
    /// Input weight (PD, m x m).
    pub input_weight: Matrix,
    /// Weight on the appended error integrator state.
    pub integral_weight: f64,
    /// Process-noise covariance (PSD, n x n).
    pub process_noise: Matrix,
    /// Measurement-noise covariance (PD, o x o).
    pub measurement_noise: Matrix,
}

impl SynthesisSpec {
    /// Default knobs for a given nominal model: state weight C'C, unit
    /// noise covariances. The input and integral weights are sized for the
    /// driveline's units (positions ~1e-2 m, forces ~1e1 N): the cheap input
    /// and heavy integrator give a tight loop that recovers from the
    /// excitation transient well inside each reference segment.
    pub fn default_for(nominal: &NominalModel) -> SynthesisSpec {
        let (a, _, _, c) = nominal;
        let n = a.rows();
        SynthesisSpec {
            state_weight: c.transpose().matmul(c),
            input_weight: Matrix::scalar(1e-6),
            integral_weight: 100.0,
            process_noise: Matrix::identity(n),
            measurement_noise: Matrix::identity(c.rows()),
        }
    }
}

/// Synthesize the output-feedback controller: state-feedback gain from the
/// regulator DARE on the integrator-augmented model, observer gain from the
/// dual DARE, assembled into error-driven observer form. The feedforward
/// gain inverts the nominal DC gain; it is disabled (set to 0) when I - A
/// is singular.
pub fn synthesize(nominal: &NominalModel, spec: &SynthesisSpec) -> Result<ControllerSS> {
    let (a, _b1, b2, c) = nominal;
    let n = a.rows();
    let o = c.rows();
    let m = b2.cols();

    // Integrator-augmented regulator design: x_aug = [x; z], z' = z + e.
    let na = n + o;
    let mut a_aug = Matrix::zeros(na, na);
    a_aug.set_block(0, 0, a);
    a_aug.set_block(n, 0, &c.scale(-1.0));
    a_aug.set_block(n, n, &Matrix::identity(o));
    let mut b_aug = Matrix::zeros(na, m);
    b_aug.set_block(0, 0, b2);
    let mut q_aug = Matrix::zeros(na, na);
    q_aug.set_block(0, 0, &spec.state_weight);
    for i in 0..o {
        q_aug[(n + i, n + i)] = spec.integral_weight;
    }

    let p_reg = dare_solve(&a_aug, &b_aug, &q_aug, &spec.input_weight).map_err(|e| {
        Error::Synthesis {
            which: "regulator",
            source: Box::new(e),
        }
    })?;
    let k_aug = lqr_gain(&a_aug, &b_aug, &spec.input_weight, &p_reg)?;
    let k_x = k_aug.block(0, 0, m, n);
    let k_z = k_aug.block(0, n, m, o);

    // Observer design on the dual pair (A', C').
    let p_obs = dare_solve(
        &a.transpose(),
        &c.transpose(),
        &spec.process_noise,
        &spec.measurement_noise,
    )
    .map_err(|e| Error::Synthesis {
        which: "observer",
        source: Box::new(e),
    })?;
    // L = A P C' (C P C' + V)^{-1}
    let cpct = c.matmul(&p_obs).matmul(&c.transpose()).add(&spec.measurement_noise);
    let l = a
        .matmul(&p_obs)
        .matmul(&c.transpose())
        .matmul(&cpct.inverse()?);

    // Controller state x_c = [x_hat; z]. The observer runs in deviation
    // coordinates where the measurement is -e:
    //   x_hat' = (A - B2 Kx - L C) x_hat - B2 Kz z - L e
    //   z'     = z + e
    //   u_fb   = -Kx x_hat - Kz z
    let nc = n + o;
    let mut a_c = Matrix::zeros(nc, nc);
    let a_obs = a
        .sub(&b2.matmul(&k_x))
        .sub(&l.matmul(c));
    a_c.set_block(0, 0, &a_obs);
    a_c.set_block(0, n, &b2.matmul(&k_z).scale(-1.0));
    a_c.set_block(n, n, &Matrix::identity(o));
    let mut b_c = Matrix::zeros(nc, o);
    b_c.set_block(0, 0, &l.scale(-1.0));
    b_c.set_block(n, 0, &Matrix::identity(o));
    let mut c_c = Matrix::zeros(m, nc);
    c_c.set_block(0, 0, &k_x.scale(-1.0));
    c_c.set_block(0, n, &k_z.scale(-1.0));
    let d_c = Matrix::zeros(m, o);

    // DC-inversion feedforward; disabled if I - A is singular.
    let u_ff_gain = match Matrix::identity(n).sub(a).inverse() {
        Ok(inv) => {
            let g = c.matmul(&inv).matmul(b2)[(0, 0)];
            if g.abs() < 1e-300 {
                0.0
            } else {
                1.0 / g
            }
        }
        Err(_) => 0.0,
    };

    let ctrl = ControllerSS {
        a_c,
        b_c,
        c_c,
        d_c,
        x_c: vec![0.0; nc],
        u_ff_gain,
    };

    let rho = spectral_radius(&closed_loop_matrix(nominal, &ctrl));
    if rho >= 1.0 {
        return Err(Error::Precondition(format!(
            "synthesized closed loop is unstable (spectral radius {rho:.6})"
        )));
    }
    Ok(ctrl)
}

/// System matrix of the nominal linear plant in feedback with the
/// controller (reference and disturbance set to zero).
pub fn closed_loop_matrix(nominal: &NominalModel, ctrl: &ControllerSS) -> Matrix {
    let (a, _b1, b2, c) = nominal;
    let n = a.rows();
    let nc = ctrl.state_dim();
    let mut cl = Matrix::zeros(n + nc, n + nc);
    // x' = A x + B2 (C_c x_c + D_c e), e = -C x
    cl.set_block(0, 0, &a.sub(&b2.matmul(&ctrl.d_c).matmul(c)));
    cl.set_block(0, n, &b2.matmul(&ctrl.c_c));
    // x_c' = A_c x_c - B_c C x
    cl.set_block(n, 0, &ctrl.b_c.matmul(c).scale(-1.0));
    cl.set_block(n, n, &ctrl.a_c);
    cl
}

/// Simulate the nominal linear closed loop tracking a constant reference.
/// Returns (outputs, inputs) per step. Used by synthesis checks and tests.
pub fn simulate_nominal_loop(
    nominal: &NominalModel,
    ctrl: &ControllerSS,
    y_r: f64,
    steps: usize,
) -> (Vec<f64>, Vec<f64>) {
    let (a, _b1, b2, c) = nominal;
    let mut ctrl = ctrl.clone();
    ctrl.reset();
    let mut x = vec![0.0; a.rows()];
    let mut ys = Vec::with_capacity(steps);
    let mut us = Vec::with_capacity(steps);
    for _ in 0..steps {
        let y = dot(c.row(0), &x);
        let e = y_r - y;
        let u = ctrl.step(e) + ctrl.feedforward(y_r);
        let mut next = a.matvec(&x);
        for (i, v) in next.iter_mut().enumerate() {
            *v += b2[(i, 0)] * u;
        }
        x = next;
        ys.push(y);
        us.push(u);
    }
    (ys, us)
}
