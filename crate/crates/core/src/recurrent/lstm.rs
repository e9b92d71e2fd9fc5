use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{sigmoid, Mat, ParamSet};

/// Gate order used for naming and iteration: input, forget, output, candidate.
pub const GATES: [&str; 4] = ["i", "f", "o", "c"];

/// Weights of one LSTM direction. Every gate matrix is `H x (H + d)` and
/// multiplies the concatenation `[h_prev, x]`; biases are `H x 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_i: Mat,
    pub w_f: Mat,
    pub w_o: Mat,
    pub w_c: Mat,
    pub b_i: Mat,
    pub b_f: Mat,
    pub b_o: Mat,
    pub b_c: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    /// `[h_prev, x]`
    z: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
    pub(crate) c: Vec<f64>,
    pub(crate) h: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        let w = || Mat::zeros(hidden, hidden + input);
        let b = || Mat::zeros(hidden, 1);
        LstmParams {
            w_i: w(),
            w_f: w(),
            w_o: w(),
            w_c: w(),
            b_i: b(),
            b_f: b(),
            b_o: b(),
            b_c: b(),
        }
    }

    /// Glorot-uniform weights, zero biases except the forget gate at 1.
    pub fn glorot(hidden: usize, input: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut p = LstmParams::zeros(hidden, input);
        let limit = (6.0 / ((hidden + input) + hidden) as f64).sqrt();
        for w in [&mut p.w_i, &mut p.w_f, &mut p.w_o, &mut p.w_c] {
            for v in w.as_mut_slice() {
                *v = rng.gen_range(-limit..limit);
            }
        }
        p.b_f.fill(1.0);
        p
    }

    /// Uniform(-scale, scale) everywhere, biases included. Test helper for
    /// exercising every parameter.
    pub fn random(hidden: usize, input: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = LstmParams::zeros(hidden, input);
        for m in p.mats_mut() {
            for v in m.as_mut_slice() {
                *v = rng.gen_range(-scale..scale);
            }
        }
        p
    }

    pub fn hidden(&self) -> usize {
        self.w_i.rows()
    }

    pub fn input(&self) -> usize {
        self.w_i.cols() - self.w_i.rows()
    }

    fn weights(&self) -> [&Mat; 4] {
        [&self.w_i, &self.w_f, &self.w_o, &self.w_c]
    }

    fn biases(&self) -> [&Mat; 4] {
        [&self.b_i, &self.b_f, &self.b_o, &self.b_c]
    }

    /// Weights then biases, each in gate order.
    pub fn mats(&self) -> [&Mat; 8] {
        [
            &self.w_i, &self.w_f, &self.w_o, &self.w_c, &self.b_i, &self.b_f, &self.b_o, &self.b_c,
        ]
    }

    pub fn mats_mut(&mut self) -> [&mut Mat; 8] {
        [
            &mut self.w_i,
            &mut self.w_f,
            &mut self.w_o,
            &mut self.w_c,
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_o,
            &mut self.b_c,
        ]
    }

    /// Parameter names under `prefix`, matching [`LstmParams::mats`] order.
    pub fn names(prefix: &str) -> [String; 8] {
        ["w_i", "w_f", "w_o", "w_c", "b_i", "b_f", "b_o", "b_c"].map(|n| format!("{prefix}.{n}"))
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Mat> {
        Some(match name {
            "w_i" => &mut self.w_i,
            "w_f" => &mut self.w_f,
            "w_o" => &mut self.w_o,
            "w_c" => &mut self.w_c,
            "b_i" => &mut self.b_i,
            "b_f" => &mut self.b_f,
            "b_o" => &mut self.b_o,
            "b_c" => &mut self.b_c,
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hidden();
        let cols = self.w_i.cols();
        if cols <= h {
            return Err(Error::Shape(format!("LSTM weights {h}x{cols} leave no input columns")));
        }
        for w in self.weights() {
            if w.shape() != (h, cols) {
                return Err(Error::Shape(format!(
                    "LSTM gate weights {:?}, expected {:?}",
                    w.shape(),
                    (h, cols)
                )));
            }
        }
        for b in self.biases() {
            if b.shape() != (h, 1) {
                return Err(Error::Shape(format!("LSTM bias {:?}, expected ({h}, 1)", b.shape())));
            }
        }
        Ok(())
    }

    pub(crate) fn export(&self, prefix: &str, out: &mut ParamSet) -> Result<()> {
        for (name, m) in Self::names(prefix).into_iter().zip(self.mats()) {
            out.insert(name, m.clone())?;
        }
        Ok(())
    }

    pub(crate) fn zero_grads(&self, prefix: &str, out: &mut ParamSet) -> Result<()> {
        for (name, m) in Self::names(prefix).into_iter().zip(self.mats()) {
            out.insert(name, Mat::zeros(m.rows(), m.cols()))?;
        }
        Ok(())
    }

    pub(crate) fn import(&mut self, prefix: &str, from: &ParamSet) -> Result<()> {
        for (name, m) in Self::names(prefix).into_iter().zip(self.mats_mut()) {
            let src = from
                .get(&name)
                .ok_or_else(|| Error::ModelFormat(format!("missing parameter {name}")))?;
            if src.shape() != m.shape() {
                return Err(Error::Shape(format!(
                    "{name} is {:?}, expected {:?}",
                    src.shape(),
                    m.shape()
                )));
            }
            *m = src.clone();
        }
        Ok(())
    }

    /// One cell update, keeping the intermediates.
    pub(crate) fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
        let hidden = self.hidden();
        let mut z = Vec::with_capacity(self.w_i.cols());
        z.extend_from_slice(h_prev);
        z.extend_from_slice(x);

        let pre = |w: &Mat, b: &Mat, r: usize| -> f64 {
            let row = w.row(r);
            let mut s = b.as_slice()[r];
            for (a, v) in row.iter().zip(&z) {
                s += a * v;
            }
            s
        };
        let mut i = vec![0.0; hidden];
        let mut f = vec![0.0; hidden];
        let mut o = vec![0.0; hidden];
        let mut g = vec![0.0; hidden];
        let mut c = vec![0.0; hidden];
        let mut tanh_c = vec![0.0; hidden];
        let mut h = vec![0.0; hidden];
        for r in 0..hidden {
            i[r] = sigmoid(pre(&self.w_i, &self.b_i, r));
            f[r] = sigmoid(pre(&self.w_f, &self.b_f, r));
            o[r] = sigmoid(pre(&self.w_o, &self.b_o, r));
            g[r] = pre(&self.w_c, &self.b_c, r).tanh();
            c[r] = f[r] * c_prev[r] + i[r] * g[r];
            tanh_c[r] = c[r].tanh();
            h[r] = o[r] * tanh_c[r];
        }
        StepCache {
            z,
            i,
            f,
            o,
            g,
            c_prev: c_prev.to_vec(),
            tanh_c,
            c,
            h,
        }
    }

    fn check_input(&self, x_len: usize) -> Result<()> {
        if x_len != self.input() {
            return Err(Error::Shape(format!(
                "LSTM input has {x_len} features, cell expects {}",
                self.input()
            )));
        }
        Ok(())
    }
}

/// Applies the LSTM cell once:
/// gates i, f, o by sigmoid and candidate by tanh over `[h_prev, x]`, then
/// `c = f*c_prev + i*candidate` and `h = o*tanh(c)`.
pub fn lstm_cell(params: &LstmParams, x: &[f64], prev: &LstmState) -> Result<LstmState> {
    params.check_input(x.len())?;
    let hidden = params.hidden();
    if prev.h.len() != hidden || prev.c.len() != hidden {
        return Err(Error::Shape(format!(
            "LSTM state has sizes ({}, {}), cell expects {hidden}",
            prev.h.len(),
            prev.c.len()
        )));
    }
    let s = params.step(x, &prev.h, &prev.c);
    Ok(LstmState { h: s.h, c: s.c })
}

pub(crate) fn forward_cached(params: &LstmParams, xs: &Mat) -> Result<Vec<StepCache>> {
    if xs.rows() == 0 {
        return Err(Error::Data("cannot encode an empty sequence".into()));
    }
    params.check_input(xs.cols())?;
    let hidden = params.hidden();
    let mut caches: Vec<StepCache> = Vec::with_capacity(xs.rows());
    let zeros = vec![0.0; hidden];
    for t in 0..xs.rows() {
        let (h_prev, c_prev) = match caches.last() {
            Some(s) => (s.h.as_slice(), s.c.as_slice()),
            None => (zeros.as_slice(), zeros.as_slice()),
        };
        let step = params.step(xs.row(t), h_prev, c_prev);
        caches.push(step);
    }
    Ok(caches)
}

/// Runs the cell over `xs` (one row per time step) from a zero state and
/// returns the state after every step.
pub fn encode_forward(params: &LstmParams, xs: &Mat) -> Result<Vec<LstmState>> {
    Ok(forward_cached(params, xs)?
        .into_iter()
        .map(|s| LstmState { h: s.h, c: s.c })
        .collect())
}

fn reversed_rows(xs: &Mat) -> Mat {
    let n = xs.rows();
    Mat::from_fn(n, xs.cols(), |r, c| xs.get(n - 1 - r, c))
}

pub(crate) fn backward_cached(params: &LstmParams, xs: &Mat) -> Result<Vec<StepCache>> {
    forward_cached(params, &reversed_rows(xs))
}

/// Forward and backward hidden states aligned by position: element `t`
/// pairs the forward state after reading `x_1..x_t` with the backward state
/// after reading `x_n..x_t`.
pub fn encode_bidirectional(
    forward: &LstmParams,
    backward: &LstmParams,
    xs: &Mat,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let fwd = encode_forward(forward, xs)?;
    let mut bwd = encode_forward(backward, &reversed_rows(xs))?;
    bwd.reverse();
    Ok(fwd.into_iter().zip(bwd).map(|(f, b)| (f.h, b.h)).collect())
}

/// Backpropagation through time for one direction.
///
/// `dh_out[t]` is the loss gradient arriving at `h_t` from outside the
/// chain (only non-zero where the head reads). Parameter gradients are
/// added into `grads` under `prefix`; the gradient w.r.t. each input row is
/// returned in the same order as the caches.
pub(crate) fn backprop_chain(
    params: &LstmParams,
    caches: &[StepCache],
    dh_out: &[Option<Vec<f64>>],
    prefix: &str,
    grads: &mut ParamSet,
) -> Result<Mat> {
    let hidden = params.hidden();
    let input = params.input();
    let width = hidden + input;
    let names = LstmParams::names(prefix);
    let weights = params.weights();

    // local accumulators, flushed into `grads` at the end
    let mut dw: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; hidden * width]);
    let mut db: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; hidden]);
    let mut dxs = Mat::zeros(caches.len(), input);

    let mut dh_next = vec![0.0; hidden];
    let mut dc_next = vec![0.0; hidden];
    let mut da: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; hidden]);
    let mut dz = vec![0.0; width];

    for t in (0..caches.len()).rev() {
        let s = &caches[t];
        if let Some(ext) = &dh_out[t] {
            for (d, e) in dh_next.iter_mut().zip(ext) {
                *d += e;
            }
        }
        for r in 0..hidden {
            let dh = dh_next[r];
            let dc = dc_next[r] + dh * s.o[r] * (1.0 - s.tanh_c[r] * s.tanh_c[r]);
            let d_o = dh * s.tanh_c[r];
            let d_i = dc * s.g[r];
            let d_g = dc * s.i[r];
            let d_f = dc * s.c_prev[r];
            da[0][r] = d_i * s.i[r] * (1.0 - s.i[r]);
            da[1][r] = d_f * s.f[r] * (1.0 - s.f[r]);
            da[2][r] = d_o * s.o[r] * (1.0 - s.o[r]);
            da[3][r] = d_g * (1.0 - s.g[r] * s.g[r]);
            dc_next[r] = dc * s.f[r];
        }
        dz.iter_mut().for_each(|v| *v = 0.0);
        for gate in 0..4 {
            let w = weights[gate];
            for r in 0..hidden {
                let a = da[gate][r];
                if a == 0.0 {
                    continue;
                }
                db[gate][r] += a;
                let dw_row = &mut dw[gate][r * width..(r + 1) * width];
                for ((dwv, zv), (dzv, wv)) in dw_row
                    .iter_mut()
                    .zip(&s.z)
                    .zip(dz.iter_mut().zip(w.row(r)))
                {
                    *dwv += a * zv;
                    *dzv += a * wv;
                }
            }
        }
        dh_next.copy_from_slice(&dz[..hidden]);
        dxs.row_mut(t).copy_from_slice(&dz[hidden..]);
    }

    for gate in 0..4 {
        add_into(grads, &names[gate], &dw[gate])?;
        add_into(grads, &names[gate + 4], &db[gate])?;
    }
    Ok(dxs)
}

fn add_into(grads: &mut ParamSet, name: &str, values: &[f64]) -> Result<()> {
    let g = grads
        .get_mut(name)
        .ok_or_else(|| Error::Shape(format!("gradient buffer missing {name}")))?;
    for (a, b) in g.as_mut_slice().iter_mut().zip(values) {
        *a += b;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xs(n: usize, d: usize, seed: u64) -> Mat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn zero_params_fixed_point() {
        let p = LstmParams::zeros(3, 2);
        let s = p.step(&[0.7, -2.0], &[0.0; 3], &[0.0; 3]);
        assert!(s.i.iter().chain(&s.f).chain(&s.o).all(|&v| v == 0.5));
        assert!(s.g.iter().chain(&s.c).chain(&s.h).all(|&v| v == 0.0));
    }

    #[test]
    fn closed_output_gate() {
        let mut p = LstmParams::zeros(2, 2);
        p.b_o.fill(-1000.0);
        p.b_c.fill(0.5);
        let mut state = LstmState::zeros(2);
        for _ in 0..3 {
            state = lstm_cell(&p, &[1.0, -1.0], &state).unwrap();
            assert!(state.h.iter().all(|&h| h == 0.0));
        }
        // c = 0.5*c + 0.5*tanh(0.5), three times from zero
        let g = 0.5f64.tanh() * 0.5;
        let expected = g * (1.0 + 0.5 + 0.25);
        assert!((state.c[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn shape_errors() {
        let p = LstmParams::zeros(2, 3);
        assert!(lstm_cell(&p, &[1.0], &LstmState::zeros(2)).is_err());
        assert!(lstm_cell(&p, &[1.0; 3], &LstmState::zeros(4)).is_err());
        assert!(encode_forward(&p, &Mat::zeros(0, 3)).is_err());
    }

    #[test]
    fn single_step_sequence_is_one_cell_application() {
        let p = LstmParams::random(4, 3, 0.5, 1);
        let x = xs(1, 3, 2);
        let states = encode_forward(&p, &x).unwrap();
        assert_eq!(states.len(), 1);
        assert_eq!(states[0], lstm_cell(&p, x.row(0), &LstmState::zeros(4)).unwrap());
    }

    #[test]
    fn zero_params_all_states_zero() {
        let states = encode_forward(&LstmParams::zeros(3, 2), &xs(5, 2, 4)).unwrap();
        assert!(states.iter().all(|s| s.h.iter().chain(&s.c).all(|&v| v == 0.0)));
    }

    #[test]
    fn chaining_matches_manual_calls() {
        let p = LstmParams::random(5, 3, 0.8, 7);
        let x = xs(4, 3, 8);
        let states = encode_forward(&p, &x).unwrap();
        let mut s = LstmState::zeros(5);
        for t in 0..4 {
            s = lstm_cell(&p, x.row(t), &s).unwrap();
            assert_eq!(states[t], s);
        }
    }

    #[test]
    fn length_one_bidirectional_with_tied_params() {
        let p = LstmParams::random(3, 2, 0.5, 3);
        let pairs = encode_bidirectional(&p, &p, &xs(1, 2, 1)).unwrap();
        assert_eq!(pairs[0].0, pairs[0].1);
    }

    #[test]
    fn gates_stay_in_open_unit_interval() {
        let p = LstmParams::random(6, 4, 2.0, 99);
        let x = xs(8, 4, 100);
        let caches = forward_cached(&p, &x).unwrap();
        for s in &caches {
            for v in s.i.iter().chain(&s.f).chain(&s.o) {
                assert!(*v > 0.0 && *v < 1.0);
            }
            assert!(s.h.iter().all(|h| h.abs() < 1.0));
        }
    }
}
