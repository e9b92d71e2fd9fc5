#![allow(dead_code, clippy::needless_range_loop)]

use headpop::corpus::{Headline, Label, LabeledExample};
use headpop::embeddings::EmbeddingMatrix;
use headpop::numerics::Mat;
use headpop::recurrent::{LstmParams, RecurrentConfig, RecurrentKind, RecurrentModel};
use headpop::text::{tokenize, Vocabulary};

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| (0..m.cols()).map(|c| m.get(r, c)).collect()).collect()
}

/// Plain nested-vector copy of one direction's weights, gate order i, f, o, c.
pub struct ScalarLstm {
    pub w: [Vec<Vec<f64>>; 4],
    pub b: [Vec<f64>; 4],
}

impl ScalarLstm {
    pub fn from_params(p: &LstmParams) -> Self {
        ScalarLstm {
            w: [to_rows(&p.w_i), to_rows(&p.w_f), to_rows(&p.w_o), to_rows(&p.w_c)],
            b: [
                p.b_i.as_slice().to_vec(),
                p.b_f.as_slice().to_vec(),
                p.b_o.as_slice().to_vec(),
                p.b_c.as_slice().to_vec(),
            ],
        }
    }

    /// One step written as explicit index loops over `[h_prev, x]`.
    pub fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let hid = h.len();
        let mut h_new = vec![0.0; hid];
        let mut c_new = vec![0.0; hid];
        for r in 0..hid {
            let mut pre = [0.0f64; 4];
            for g in 0..4 {
                let mut s = self.b[g][r];
                for k in 0..hid {
                    s += self.w[g][r][k] * h[k];
                }
                for k in 0..x.len() {
                    s += self.w[g][r][hid + k] * x[k];
                }
                pre[g] = s;
            }
            let i = sig(pre[0]);
            let f = sig(pre[1]);
            let o = sig(pre[2]);
            let cand = pre[3].tanh();
            c_new[r] = f * c[r] + i * cand;
            h_new[r] = o * c_new[r].tanh();
        }
        (h_new, c_new)
    }

    pub fn rollout(&self, xs: &[Vec<f64>]) -> Vec<(Vec<f64>, Vec<f64>)> {
        let hid = self.b[0].len();
        let (mut h, mut c) = (vec![0.0; hid], vec![0.0; hid]);
        let mut out = Vec::new();
        for x in xs {
            let (h2, c2) = self.step(x, &h, &c);
            h = h2;
            c = c2;
            out.push((h.clone(), c.clone()));
        }
        out
    }
}

/// Labels recomputed from scratch: for each headline, gather its group's
/// metrics by linear scan, sort, take the middle (mean of the two middles
/// for even counts), compare strictly.
pub fn brute_force_labels(data: &[Headline]) -> Vec<(String, Label)> {
    data.iter()
        .map(|h| {
            let mut group: Vec<f64> = data.iter().filter(|o| o.group == h.group).map(|o| o.metric).collect();
            group.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = group.len();
            let median = if n % 2 == 1 {
                group[n / 2]
            } else {
                (group[n / 2 - 1] + group[n / 2]) / 2.0
            };
            let label = if h.metric > median { Label::Popular } else { Label::Unpopular };
            (h.id.clone(), label)
        })
        .collect()
}

pub fn labeled(id: &str, title: &str, label: Label) -> LabeledExample {
    LabeledExample::new(Headline::new(id, title, label.as_f64(), "g").unwrap(), label)
}

pub fn vocab_of(titles: &[&str]) -> Vocabulary {
    let toks: Vec<Vec<String>> = titles.iter().map(|t| tokenize(t)).collect();
    Vocabulary::build(&toks, None, 1)
}

/// A recurrent model with every parameter (embedding and head included)
/// drawn uniformly from (-scale, scale).
pub fn random_recurrent(
    kind: RecurrentKind,
    hidden: usize,
    dim: usize,
    titles: &[&str],
    scale: f64,
    seed: u64,
) -> RecurrentModel {
    let vocab = vocab_of(titles);
    let embedding = EmbeddingMatrix::build(&vocab, None, dim, seed, true).unwrap();
    let config = RecurrentConfig {
        kind,
        hidden,
        embed_dim: dim,
        max_seq_len: 30,
    };
    let mut m = RecurrentModel::new(config, vocab, embedding, seed).unwrap();
    m.forward = LstmParams::random(hidden, dim, scale, seed + 100);
    if let Some(b) = &mut m.backward {
        *b = LstmParams::random(hidden, dim, scale, seed + 200);
    }
    let width = m.head_w.cols();
    m.head_w = Mat::from_fn(1, width, |_, c| scale * (((c * 7 + 3) % 11) as f64 / 5.0 - 1.0));
    m.head_b = Mat::scalar(0.1).unwrap();
    for v in m.embedding.matrix.as_mut_slice().iter_mut().skip(dim) {
        *v *= scale / 0.05;
    }
    m
}
