use rand::Rng;

use super::table::{EmbeddingTable, Lookup};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Candidate = 3,
}

pub const GATES: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Candidate];

/// Weights of one gate. Matrices are `dim x dim`, row-major, output-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    pub w_input: Vec<f64>,
    pub w_recur: Vec<f64>,
    pub bias: Vec<f64>,
}

impl GateParams {
    fn zeros(dim: usize) -> Self {
        GateParams {
            w_input: vec![0.0; dim * dim],
            w_recur: vec![0.0; dim * dim],
            bias: vec![0.0; dim],
        }
    }
}

/// LSTM whose input size and hidden size both equal the word dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub dim: usize,
    pub gates: [GateParams; 4],
}

impl LstmParams {
    pub fn zeros(dim: usize) -> Self {
        LstmParams {
            dim,
            gates: std::array::from_fn(|_| GateParams::zeros(dim)),
        }
    }

    /// Uniform(-1/sqrt(dim), 1/sqrt(dim)) weights and biases, forget bias +1.
    pub fn init<R: Rng>(dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (dim as f64).sqrt();
        let mut p = Self::zeros(dim);
        for gate in &mut p.gates {
            for v in gate.w_input.iter_mut().chain(&mut gate.w_recur).chain(&mut gate.bias) {
                *v = rng.gen_range(-bound..bound);
            }
        }
        for b in &mut p.gates[Gate::Forget as usize].bias {
            *b += 1.0;
        }
        p
    }

    pub fn gate(&self, g: Gate) -> &GateParams {
        &self.gates[g as usize]
    }

    /// Tensors in checkpoint order: per gate (input, forget, output,
    /// candidate) the input weights, recurrent weights, then bias.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.gates
            .iter()
            .flat_map(|g| [g.w_input.as_slice(), g.w_recur.as_slice(), g.bias.as_slice()])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.gates
            .iter_mut()
            .flat_map(|g| [g.w_input.as_mut_slice(), g.w_recur.as_mut_slice(), g.bias.as_mut_slice()])
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Runs the recurrence from zero hidden and cell state, keeping what the
    /// backward pass needs.
    pub fn forward(&self, table: &EmbeddingTable, tokens: &[String]) -> LstmTrace {
        let d = self.dim;
        let mut trace = LstmTrace {
            inputs: Vec::with_capacity(tokens.len()),
            unknown: Vec::with_capacity(tokens.len()),
            steps: Vec::with_capacity(tokens.len()),
            dim: d,
        };
        let mut h = vec![0.0; d];
        let mut c = vec![0.0; d];
        let mut z = [vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]];
        for tok in tokens {
            let (x, unknown) = match table.resolve(tok) {
                Lookup::Known(v) => (v, false),
                Lookup::Unknown => (table.unk.as_slice(), true),
            };
            for (k, gate) in self.gates.iter().enumerate() {
                let zk = &mut z[k];
                zk.copy_from_slice(&gate.bias);
                for r in 0..d {
                    let wi = &gate.w_input[r * d..(r + 1) * d];
                    let wr = &gate.w_recur[r * d..(r + 1) * d];
                    let mut acc = 0.0;
                    for j in 0..d {
                        acc += wi[j] * x[j] + wr[j] * h[j];
                    }
                    zk[r] += acc;
                }
            }
            let i: Vec<f64> = z[0].iter().map(|&v| sigmoid(v)).collect();
            let f: Vec<f64> = z[1].iter().map(|&v| sigmoid(v)).collect();
            let o: Vec<f64> = z[2].iter().map(|&v| sigmoid(v)).collect();
            let g: Vec<f64> = z[3].iter().map(|&v| v.tanh()).collect();
            for r in 0..d {
                c[r] = f[r] * c[r] + i[r] * g[r];
            }
            let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
            for r in 0..d {
                h[r] = o[r] * tanh_c[r];
            }
            trace.inputs.push(x.to_vec());
            trace.unknown.push(unknown);
            trace.steps.push(StepCache {
                i,
                f,
                o,
                g,
                c: c.clone(),
                tanh_c,
                h: h.clone(),
            });
        }
        trace
    }
}

#[derive(Debug, Clone)]
struct StepCache {
    i: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

/// Activations of one forward pass.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    inputs: Vec<Vec<f64>>,
    unknown: Vec<bool>,
    steps: Vec<StepCache>,
    dim: usize,
}

impl LstmTrace {
    /// Final hidden state; zero for an empty sequence.
    pub fn output(&self) -> Vec<f64> {
        self.steps
            .last()
            .map(|s| s.h.clone())
            .unwrap_or_else(|| vec![0.0; self.dim])
    }

    /// Backpropagates `upstream = dL/dh_T` through time, accumulating into
    /// `grads` and, for `<unk>` inputs, into `unk_grad`.
    pub fn backward(&self, params: &LstmParams, upstream: &[f64], grads: &mut LstmParams, unk_grad: &mut [f64]) {
        let d = self.dim;
        let zero = vec![0.0; d];
        let mut dh = upstream.to_vec();
        let mut dc = vec![0.0; d];
        let mut dz = [vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]];
        for t in (0..self.steps.len()).rev() {
            let s = &self.steps[t];
            let (c_prev, h_prev) = if t == 0 {
                (&zero, &zero)
            } else {
                (&self.steps[t - 1].c, &self.steps[t - 1].h)
            };
            for r in 0..d {
                let d_o = dh[r] * s.tanh_c[r];
                dc[r] += dh[r] * s.o[r] * (1.0 - s.tanh_c[r] * s.tanh_c[r]);
                let d_i = dc[r] * s.g[r];
                let d_g = dc[r] * s.i[r];
                let d_f = dc[r] * c_prev[r];
                dz[0][r] = d_i * s.i[r] * (1.0 - s.i[r]);
                dz[1][r] = d_f * s.f[r] * (1.0 - s.f[r]);
                dz[2][r] = d_o * s.o[r] * (1.0 - s.o[r]);
                dz[3][r] = d_g * (1.0 - s.g[r] * s.g[r]);
                dc[r] *= s.f[r];
            }
            let x = &self.inputs[t];
            let mut dx = vec![0.0; d];
            let mut dh_prev = vec![0.0; d];
            for k in 0..4 {
                let gp = &params.gates[k];
                let gg = &mut grads.gates[k];
                for r in 0..d {
                    let dzr = dz[k][r];
                    if dzr == 0.0 {
                        continue;
                    }
                    gg.bias[r] += dzr;
                    let row = r * d..(r + 1) * d;
                    for (gw, &xj) in gg.w_input[row.clone()].iter_mut().zip(x) {
                        *gw += dzr * xj;
                    }
                    for (dxj, &wj) in dx.iter_mut().zip(&gp.w_input[row.clone()]) {
                        *dxj += wj * dzr;
                    }
                    for (gw, &hj) in gg.w_recur[row.clone()].iter_mut().zip(h_prev) {
                        *gw += dzr * hj;
                    }
                    for (dhj, &wj) in dh_prev.iter_mut().zip(&gp.w_recur[row]) {
                        *dhj += wj * dzr;
                    }
                }
            }
            if self.unknown[t] {
                for (u, v) in unk_grad.iter_mut().zip(&dx) {
                    *u += v;
                }
            }
            dh = dh_prev;
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
