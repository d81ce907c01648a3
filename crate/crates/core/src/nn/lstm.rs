use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng};

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Hidden and cell state for a batch of sequences (batch x hidden).
#[derive(Clone, Debug)]
pub struct HiddenState {
    pub h: Matrix,
    pub c: Matrix,
}

impl HiddenState {
    pub fn zeros(batch: usize, hidden: usize) -> Self {
        HiddenState {
            h: Matrix::zeros(batch, hidden),
            c: Matrix::zeros(batch, hidden),
        }
    }
}

/// One LSTM layer with separate weights per gate.
///
/// Gate order throughout: forget, input, output, candidate. The candidate
/// uses tanh; the three gates use the logistic sigmoid.
#[derive(Clone, Debug)]
pub struct LstmLayer {
    pub w_f: Matrix,
    pub w_i: Matrix,
    pub w_o: Matrix,
    pub w_g: Matrix,
    pub r_f: Matrix,
    pub r_i: Matrix,
    pub r_o: Matrix,
    pub r_g: Matrix,
    pub b_f: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_o: Vec<f64>,
    pub b_g: Vec<f64>,
    pub hidden: usize,
}

#[derive(Clone, Debug)]
pub struct LstmStepCache {
    pub x: Matrix,
    pub h_prev: Matrix,
    pub c_prev: Matrix,
    pub f: Matrix,
    pub i: Matrix,
    pub o: Matrix,
    pub g: Matrix,
    pub tanh_c: Matrix,
}

#[derive(Clone, Debug)]
pub struct LstmGrads {
    pub dw: [Matrix; 4],
    pub dr: [Matrix; 4],
    pub db: [Vec<f64>; 4],
}

impl LstmLayer {
    /// Uniform +-1/sqrt(fan-in) init; forget bias starts at +1 so early
    /// training does not wipe the cell state.
    pub fn new(input: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        let wb = 1.0 / (input as f64).sqrt();
        let rb = 1.0 / (hidden as f64).sqrt();
        let mut wmat = || {
            let data = (0..input * hidden).map(|_| rng.uniform_range((-wb, wb))).collect();
            Matrix::from_vec(input, hidden, data)
        };
        let (w_f, w_i, w_o, w_g) = (wmat(), wmat(), wmat(), wmat());
        let mut rmat = || {
            let data = (0..hidden * hidden).map(|_| rng.uniform_range((-rb, rb))).collect();
            Matrix::from_vec(hidden, hidden, data)
        };
        let (r_f, r_i, r_o, r_g) = (rmat(), rmat(), rmat(), rmat());
        LstmLayer {
            w_f,
            w_i,
            w_o,
            w_g,
            r_f,
            r_i,
            r_o,
            r_g,
            b_f: vec![1.0; hidden],
            b_i: vec![0.0; hidden],
            b_o: vec![0.0; hidden],
            b_g: vec![0.0; hidden],
            hidden,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_f.rows()
    }

    fn gate_preact(&self, x: &Matrix, h_prev: &Matrix, w: &Matrix, r: &Matrix, b: &[f64]) -> Matrix {
        let mut z = x.matmul(w);
        z.matmul_acc(1.0, h_prev, r);
        for row in 0..z.rows() {
            for (v, bj) in z.row_mut(row).iter_mut().zip(b.iter()) {
                *v += bj;
            }
        }
        z
    }

    pub fn forward_step(&self, x: &Matrix, prev: &HiddenState) -> Result<(HiddenState, LstmStepCache)> {
        if x.cols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "lstm forward: input has {} features, layer expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        if prev.h.cols() != self.hidden || prev.h.rows() != x.rows() {
            return Err(Error::Dimension("lstm forward: hidden state shape mismatch".into()));
        }
        let mut f = self.gate_preact(x, &prev.h, &self.w_f, &self.r_f, &self.b_f);
        let mut i = self.gate_preact(x, &prev.h, &self.w_i, &self.r_i, &self.b_i);
        let mut o = self.gate_preact(x, &prev.h, &self.w_o, &self.r_o, &self.b_o);
        let mut g = self.gate_preact(x, &prev.h, &self.w_g, &self.r_g, &self.b_g);
        for v in f.data_mut() {
            *v = sigmoid(*v);
        }
        for v in i.data_mut() {
            *v = sigmoid(*v);
        }
        for v in o.data_mut() {
            *v = sigmoid(*v);
        }
        for v in g.data_mut() {
            *v = v.tanh();
        }

        let mut c = prev.c.clone();
        for (((cv, fv), iv), gv) in c
            .data_mut()
            .iter_mut()
            .zip(f.data().iter())
            .zip(i.data().iter())
            .zip(g.data().iter())
        {
            *cv = *cv * fv + iv * gv;
        }
        let mut tanh_c = c.clone();
        for v in tanh_c.data_mut() {
            *v = v.tanh();
        }
        let mut h = tanh_c.clone();
        for (hv, ov) in h.data_mut().iter_mut().zip(o.data().iter()) {
            *hv *= ov;
        }

        let cache = LstmStepCache {
            x: x.clone(),
            h_prev: prev.h.clone(),
            c_prev: prev.c.clone(),
            f,
            i,
            o,
            g,
            tanh_c,
        };
        Ok((HiddenState { h, c }, cache))
    }

    /// One step of backpropagation through time. `dh` and `dc` carry the
    /// gradients flowing into this step's outputs (upstream plus the
    /// recurrent contributions from step t+1). Returns (dx, dh_prev, dc_prev).
    pub fn backward_step(
        &self,
        cache: &LstmStepCache,
        dh: &Matrix,
        dc_in: &Matrix,
        grads: &mut LstmGrads,
    ) -> Result<(Matrix, Matrix, Matrix)> {
        let batch = cache.x.rows();
        if dh.rows() != batch || dh.cols() != self.hidden {
            return Err(Error::Dimension("lstm backward: dh shape mismatch".into()));
        }
        let n = batch * self.hidden;

        // dc = dc_in + dh . o . (1 - tanh(c)^2)
        let mut dc = dc_in.clone();
        for k in 0..n {
            let t = cache.tanh_c.data()[k];
            dc.data_mut()[k] += dh.data()[k] * cache.o.data()[k] * (1.0 - t * t);
        }

        // Pre-activation gradients, gate order [f, i, o, g].
        let mut dz = [
            Matrix::zeros(batch, self.hidden),
            Matrix::zeros(batch, self.hidden),
            Matrix::zeros(batch, self.hidden),
            Matrix::zeros(batch, self.hidden),
        ];
        let mut dc_prev = Matrix::zeros(batch, self.hidden);
        for k in 0..n {
            let (f, i, o, g) = (
                cache.f.data()[k],
                cache.i.data()[k],
                cache.o.data()[k],
                cache.g.data()[k],
            );
            let dck = dc.data()[k];
            dz[0].data_mut()[k] = dck * cache.c_prev.data()[k] * f * (1.0 - f);
            dz[1].data_mut()[k] = dck * g * i * (1.0 - i);
            dz[2].data_mut()[k] = dh.data()[k] * cache.tanh_c.data()[k] * o * (1.0 - o);
            dz[3].data_mut()[k] = dck * i * (1.0 - g * g);
            dc_prev.data_mut()[k] = dck * f;
        }

        let xt = cache.x.transpose();
        let ht = cache.h_prev.transpose();
        let ws = [&self.w_f, &self.w_i, &self.w_o, &self.w_g];
        let rs = [&self.r_f, &self.r_i, &self.r_o, &self.r_g];
        let mut dx = Matrix::zeros(batch, self.input_dim());
        let mut dh_prev = Matrix::zeros(batch, self.hidden);
        for gate in 0..4 {
            grads.dw[gate].matmul_acc(1.0, &xt, &dz[gate]);
            grads.dr[gate].matmul_acc(1.0, &ht, &dz[gate]);
            for r in 0..batch {
                for (acc, g) in grads.db[gate].iter_mut().zip(dz[gate].row(r).iter()) {
                    *acc += g;
                }
            }
            dx.matmul_acc(1.0, &dz[gate], &ws[gate].transpose());
            dh_prev.matmul_acc(1.0, &dz[gate], &rs[gate].transpose());
        }
        Ok((dx, dh_prev, dc_prev))
    }

    pub fn zero_grads(&self) -> LstmGrads {
        let w = || Matrix::zeros(self.input_dim(), self.hidden);
        let r = || Matrix::zeros(self.hidden, self.hidden);
        let b = || vec![0.0; self.hidden];
        LstmGrads {
            dw: [w(), w(), w(), w()],
            dr: [r(), r(), r(), r()],
            db: [b(), b(), b(), b()],
        }
    }

    pub fn param_count(&self) -> usize {
        4 * (self.input_dim() * self.hidden + self.hidden * self.hidden + self.hidden)
    }
}
