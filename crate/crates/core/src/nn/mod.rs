//! Minimal neural-network core: a single-layer LSTM (or dense front end for
//! the memoryless ablation), a ReLU hidden layer, a linear or tanh-scaled
//! head, exact reverse-mode gradients over sequences, and Adam.

mod adam;
mod dense;
mod lstm;

pub use adam::Adam;
pub use dense::{Activation, DenseCache, DenseGrads, DenseLayer};
pub use lstm::{HiddenState, LstmGrads, LstmLayer, LstmStepCache};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng};
use crate::textdoc::TextDoc;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RecurrentKind {
    Lstm,
    None,
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub enum OutputActivation {
    Identity,
    /// y = scale * tanh(z); keeps actor outputs inside actuator limits.
    TanhScaled(f64),
}

#[derive(Clone, Copy, Debug)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden: usize,
    pub output_dim: usize,
    pub recurrent: RecurrentKind,
    pub output: OutputActivation,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden == 0 || self.output_dim == 0 {
            return Err(Error::Precondition("network dimensions must be positive".into()));
        }
        if let OutputActivation::TanhScaled(s) = self.output {
            if !(s > 0.0) {
                return Err(Error::Precondition("output scale must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum FrontEnd {
    Lstm(LstmLayer),
    Dense(DenseLayer),
}

/// Front end (LSTM or dense ReLU) -> dense ReLU -> linear head, with an
/// optional tanh scaling on the head output.
#[derive(Clone, Debug)]
pub struct Network {
    pub spec: NetworkSpec,
    front: FrontEnd,
    mid: DenseLayer,
    head: DenseLayer,
}

#[derive(Clone, Debug)]
enum FrontStepCache {
    Lstm(LstmStepCache),
    Dense(DenseCache),
}

#[derive(Clone, Debug)]
struct StepCache {
    front: FrontStepCache,
    mid: DenseCache,
    head: DenseCache,
    out: Matrix,
}

/// Everything the backward pass needs, captured per timestep.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    steps: Vec<StepCache>,
}

#[derive(Clone, Debug)]
enum FrontGrads {
    Lstm(LstmGrads),
    Dense(DenseGrads),
}

#[derive(Clone, Debug)]
pub struct NetGrads {
    front: FrontGrads,
    mid: DenseGrads,
    head: DenseGrads,
}

impl Network {
    pub fn new(spec: NetworkSpec, rng: &mut SeededRng) -> Result<Self> {
        spec.validate()?;
        let front = match spec.recurrent {
            RecurrentKind::Lstm => FrontEnd::Lstm(LstmLayer::new(spec.input_dim, spec.hidden, rng)),
            RecurrentKind::None => {
                FrontEnd::Dense(DenseLayer::new(spec.input_dim, spec.hidden, Activation::Relu, rng))
            }
        };
        let mid = DenseLayer::new(spec.hidden, spec.hidden, Activation::Relu, rng);
        let head = DenseLayer::new(spec.hidden, spec.output_dim, Activation::Identity, rng);
        Ok(Network { spec, front, mid, head })
    }

    pub fn zero_hidden(&self, batch: usize) -> HiddenState {
        HiddenState::zeros(batch, self.spec.hidden)
    }

    /// Runs the network over a sequence of batched observations. `xs[t]` is
    /// (batch x input_dim); outputs mirror that shape with `output_dim` cols.
    pub fn forward(
        &self,
        xs: &[Matrix],
        init: &HiddenState,
    ) -> Result<(Vec<Matrix>, HiddenState, ForwardCache)> {
        if xs.is_empty() {
            return Err(Error::Precondition("forward needs a non-empty sequence".into()));
        }
        let batch = xs[0].rows();
        let mut state = init.clone();
        let mut outs = Vec::with_capacity(xs.len());
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            if x.rows() != batch {
                return Err(Error::Dimension("forward: ragged batch".into()));
            }
            let (feat, front_cache) = match &self.front {
                FrontEnd::Lstm(l) => {
                    let (next, cache) = l.forward_step(x, &state)?;
                    state = next;
                    (state.h.clone(), FrontStepCache::Lstm(cache))
                }
                FrontEnd::Dense(d) => {
                    let (y, cache) = d.forward(x)?;
                    (y, FrontStepCache::Dense(cache))
                }
            };
            let (hid, mid_cache) = self.mid.forward(&feat)?;
            let (mut out, head_cache) = self.head.forward(&hid)?;
            if let OutputActivation::TanhScaled(s) = self.spec.output {
                for v in out.data_mut() {
                    *v = s * v.tanh();
                }
            }
            outs.push(out.clone());
            steps.push(StepCache {
                front: front_cache,
                mid: mid_cache,
                head: head_cache,
                out,
            });
        }
        Ok((outs, state, ForwardCache { steps }))
    }

    /// Backpropagation through time. `upstream[t]` is dL/d(output_t); returns
    /// parameter gradients and dL/d(input_t) per step.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: &[Matrix],
    ) -> Result<(NetGrads, Vec<Matrix>)> {
        if upstream.len() != cache.steps.len() {
            return Err(Error::Precondition(
                "backward: upstream length must match the cached sequence".into(),
            ));
        }
        let mut grads = self.zero_grads();
        let batch = cache.steps[0].out.rows();
        let mut dxs = vec![Matrix::zeros(0, 0); cache.steps.len()];
        let mut dh_next = Matrix::zeros(batch, self.spec.hidden);
        let mut dc_next = Matrix::zeros(batch, self.spec.hidden);
        for t in (0..cache.steps.len()).rev() {
            let step = &cache.steps[t];
            let mut dout = upstream[t].clone();
            if dout.rows() != batch || dout.cols() != self.spec.output_dim {
                return Err(Error::Dimension("backward: upstream shape mismatch".into()));
            }
            if let OutputActivation::TanhScaled(s) = self.spec.output {
                // d(s*tanh(z))/dz = s - y^2/s, expressed via the stored output.
                for (g, y) in dout.data_mut().iter_mut().zip(step.out.data().iter()) {
                    *g *= s - y * y / s;
                }
            }
            let dhid = self.head.backward_acc(&step.head, &dout, &mut grads.head)?;
            let mut dfeat = self.mid.backward_acc(&step.mid, &dhid, &mut grads.mid)?;
            match (&self.front, &step.front, &mut grads.front) {
                (FrontEnd::Lstm(l), FrontStepCache::Lstm(c), FrontGrads::Lstm(g)) => {
                    dfeat = dfeat.add(&dh_next);
                    let (dx, dh_prev, dc_prev) = l.backward_step(c, &dfeat, &dc_next, g)?;
                    dh_next = dh_prev;
                    dc_next = dc_prev;
                    dxs[t] = dx;
                }
                (FrontEnd::Dense(d), FrontStepCache::Dense(c), FrontGrads::Dense(g)) => {
                    dxs[t] = d.backward_acc(c, &dfeat, g)?;
                }
                _ => return Err(Error::Precondition("backward: stale cache".into())),
            }
        }
        Ok((grads, dxs))
    }

    fn zero_grads(&self) -> NetGrads {
        NetGrads {
            front: match &self.front {
                FrontEnd::Lstm(l) => FrontGrads::Lstm(l.zero_grads()),
                FrontEnd::Dense(d) => FrontGrads::Dense(d.zero_grads()),
            },
            mid: self.mid.zero_grads(),
            head: self.head.zero_grads(),
        }
    }

    pub fn param_count(&self) -> usize {
        let front = match &self.front {
            FrontEnd::Lstm(l) => l.param_count(),
            FrontEnd::Dense(d) => d.param_count(),
        };
        front + self.mid.param_count() + self.head.param_count()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        match &self.front {
            FrontEnd::Lstm(l) => {
                for m in [&l.w_f, &l.w_i, &l.w_o, &l.w_g, &l.r_f, &l.r_i, &l.r_o, &l.r_g] {
                    out.extend_from_slice(m.data());
                }
                for b in [&l.b_f, &l.b_i, &l.b_o, &l.b_g] {
                    out.extend_from_slice(b);
                }
            }
            FrontEnd::Dense(d) => {
                out.extend_from_slice(d.w.data());
                out.extend_from_slice(&d.b);
            }
        }
        out.extend_from_slice(self.mid.w.data());
        out.extend_from_slice(&self.mid.b);
        out.extend_from_slice(self.head.w.data());
        out.extend_from_slice(&self.head.b);
        out
    }

    pub fn assign(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "assign: expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut pos = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&flat[pos..pos + dst.len()]);
            pos += dst.len();
        };
        match &mut self.front {
            FrontEnd::Lstm(l) => {
                for m in [
                    &mut l.w_f, &mut l.w_i, &mut l.w_o, &mut l.w_g, &mut l.r_f, &mut l.r_i,
                    &mut l.r_o, &mut l.r_g,
                ] {
                    take(m.data_mut());
                }
                for b in [&mut l.b_f, &mut l.b_i, &mut l.b_o, &mut l.b_g] {
                    take(b);
                }
            }
            FrontEnd::Dense(d) => {
                take(d.w.data_mut());
                take(&mut d.b);
            }
        }
        take(self.mid.w.data_mut());
        take(&mut self.mid.b);
        take(self.head.w.data_mut());
        take(&mut self.head.b);
        Ok(())
    }

    pub fn to_doc(&self, kind: &str) -> TextDoc {
        let mut doc = TextDoc::new(kind);
        doc.push_meta(
            "recurrent",
            match self.spec.recurrent {
                RecurrentKind::Lstm => "lstm",
                RecurrentKind::None => "none",
            },
        );
        doc.push_scalar("input_dim", self.spec.input_dim as f64);
        doc.push_scalar("hidden", self.spec.hidden as f64);
        doc.push_scalar("output_dim", self.spec.output_dim as f64);
        match self.spec.output {
            OutputActivation::Identity => doc.push_scalar("output_scale", 0.0),
            OutputActivation::TanhScaled(s) => doc.push_scalar("output_scale", s),
        }
        let row = |v: &[f64]| Matrix::from_vec(1, v.len(), v.to_vec());
        match &self.front {
            FrontEnd::Lstm(l) => {
                let names = ["f", "i", "o", "g"];
                let ws = [&l.w_f, &l.w_i, &l.w_o, &l.w_g];
                let rs = [&l.r_f, &l.r_i, &l.r_o, &l.r_g];
                let bs = [&l.b_f, &l.b_i, &l.b_o, &l.b_g];
                for k in 0..4 {
                    doc.push_tensor(&format!("lstm.w_{}", names[k]), ws[k].clone());
                    doc.push_tensor(&format!("lstm.r_{}", names[k]), rs[k].clone());
                    doc.push_tensor(&format!("lstm.b_{}", names[k]), row(bs[k]));
                }
            }
            FrontEnd::Dense(d) => {
                doc.push_tensor("front.w", d.w.clone());
                doc.push_tensor("front.b", row(&d.b));
            }
        }
        doc.push_tensor("mid.w", self.mid.w.clone());
        doc.push_tensor("mid.b", row(&self.mid.b));
        doc.push_tensor("head.w", self.head.w.clone());
        doc.push_tensor("head.b", row(&self.head.b));
        doc
    }

    pub fn from_doc(doc: &TextDoc) -> Result<Self> {
        let scale = doc.scalar("output_scale")?;
        let spec = NetworkSpec {
            input_dim: doc.scalar("input_dim")? as usize,
            hidden: doc.scalar("hidden")? as usize,
            output_dim: doc.scalar("output_dim")? as usize,
            recurrent: match doc.meta("recurrent") {
                Some("lstm") => RecurrentKind::Lstm,
                Some("none") => RecurrentKind::None,
                other => return Err(Error::Parse(format!("unknown recurrent kind {other:?}"))),
            },
            output: if scale == 0.0 {
                OutputActivation::Identity
            } else {
                OutputActivation::TanhScaled(scale)
            },
        };
        let mut rng = SeededRng::new(0);
        let mut net = Network::new(spec, &mut rng)?;
        let bias = |doc: &TextDoc, name: &str| -> Result<Vec<f64>> {
            Ok(doc.tensor(name)?.data().to_vec())
        };
        match &mut net.front {
            FrontEnd::Lstm(l) => {
                l.w_f = doc.tensor("lstm.w_f")?.clone();
                l.w_i = doc.tensor("lstm.w_i")?.clone();
                l.w_o = doc.tensor("lstm.w_o")?.clone();
                l.w_g = doc.tensor("lstm.w_g")?.clone();
                l.r_f = doc.tensor("lstm.r_f")?.clone();
                l.r_i = doc.tensor("lstm.r_i")?.clone();
                l.r_o = doc.tensor("lstm.r_o")?.clone();
                l.r_g = doc.tensor("lstm.r_g")?.clone();
                l.b_f = bias(doc, "lstm.b_f")?;
                l.b_i = bias(doc, "lstm.b_i")?;
                l.b_o = bias(doc, "lstm.b_o")?;
                l.b_g = bias(doc, "lstm.b_g")?;
            }
            FrontEnd::Dense(d) => {
                d.w = doc.tensor("front.w")?.clone();
                d.b = bias(doc, "front.b")?;
            }
        }
        net.mid.w = doc.tensor("mid.w")?.clone();
        net.mid.b = bias(doc, "mid.b")?;
        net.head.w = doc.tensor("head.w")?.clone();
        net.head.b = bias(doc, "head.b")?;
        Ok(net)
    }
}

impl NetGrads {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        match &self.front {
            FrontGrads::Lstm(g) => {
                for m in g.dw.iter().chain(g.dr.iter()) {
                    out.extend_from_slice(m.data());
                }
                for b in &g.db {
                    out.extend_from_slice(b);
                }
            }
            FrontGrads::Dense(g) => {
                out.extend_from_slice(g.dw.data());
                out.extend_from_slice(&g.db);
            }
        }
        out.extend_from_slice(self.mid.dw.data());
        out.extend_from_slice(&self.mid.db);
        out.extend_from_slice(self.head.dw.data());
        out.extend_from_slice(&self.head.db);
        out
    }

    pub fn scale(&mut self, s: f64) {
        match &mut self.front {
            FrontGrads::Lstm(g) => {
                for m in g.dw.iter_mut().chain(g.dr.iter_mut()) {
                    for v in m.data_mut() {
                        *v *= s;
                    }
                }
                for b in &mut g.db {
                    for v in b {
                        *v *= s;
                    }
                }
            }
            FrontGrads::Dense(g) => {
                for v in g.dw.data_mut() {
                    *v *= s;
                }
                for v in &mut g.db {
                    *v *= s;
                }
            }
        }
        for v in self.mid.dw.data_mut() {
            *v *= s;
        }
        for v in &mut self.mid.db {
            *v *= s;
        }
        for v in self.head.dw.data_mut() {
            *v *= s;
        }
        for v in &mut self.head.db {
            *v *= s;
        }
    }
}

/// Compares analytic gradients of loss = sum of all outputs against central
/// finite differences over the flat parameter vector. Above 10^4 parameters a
/// seeded random subset of 1500 indices is checked. Returns the maximum
/// relative error.
pub fn grad_check(net: &Network, xs: &[Matrix], epsilon: f64) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::Precondition("grad_check epsilon outside [1e-7, 1e-3]".into()));
    }
    let batch = xs[0].rows();
    let init = net.zero_hidden(batch);
    let (outs, _, cache) = net.forward(xs, &init)?;
    let upstream: Vec<Matrix> = outs
        .iter()
        .map(|o| Matrix::from_vec(o.rows(), o.cols(), vec![1.0; o.rows() * o.cols()]))
        .collect();
    let (grads, _) = net.backward(&cache, &upstream)?;
    let analytic = grads.flatten();

    let n = net.param_count();
    let indices: Vec<usize> = if n > 10_000 {
        let mut rng = SeededRng::new(0x67_72_61_64);
        (0..1500).map(|_| rng.index(n)).collect()
    } else {
        (0..n).collect()
    };

    let flat = net.flatten();
    let mut probe = net.clone();
    let mut max_rel: f64 = 0.0;
    let loss = |net: &Network| -> Result<f64> {
        let (outs, _, _) = net.forward(xs, &init)?;
        Ok(outs.iter().map(|o| o.data().iter().sum::<f64>()).sum())
    };
    for &k in &indices {
        let mut bumped = flat.clone();
        bumped[k] += epsilon;
        probe.assign(&bumped)?;
        let fp = loss(&probe)?;
        bumped[k] = flat[k] - epsilon;
        probe.assign(&bumped)?;
        let fm = loss(&probe)?;
        let numeric = (fp - fm) / (2.0 * epsilon);
        let rel = (analytic[k] - numeric).abs() / (analytic[k].abs() + numeric.abs() + 1e-4);
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}
