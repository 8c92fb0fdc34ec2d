//! Test support: independent scalar-loop oracles and synthetic corpora.
#![allow(dead_code, clippy::needless_range_loop)]

use extsum::corpus::Document;
use extsum::embed::WordVectorStore;
use extsum::net::{backward, forward, GruCellParams, ModelDims, ModelParams};
use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every parameter (biases included) drawn from U(-scale, scale).
pub fn random_params(dims: ModelDims, seed: u64, scale: f64) -> ModelParams {
    let mut rng = rng(seed ^ 0xA5A5);
    let dist = Uniform::new_inclusive(-scale, scale);
    let mut p = ModelParams::zeros(dims);
    for t in p.tensors_mut() {
        t.iter_mut().for_each(|v| *v = dist.sample(&mut rng));
    }
    p
}

pub fn random_inputs(n: usize, dim: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// GRU step written as explicit scalar loops over matrix entries.
pub fn oracle_gru(cell: &GruCellParams, x: &[f64], h: &[f64]) -> Vec<f64> {
    let hd = cell.hidden_dim();
    let id = cell.input_dim();
    let mut out = vec![0.0; hd];
    let mut z = vec![0.0; hd];
    let mut r = vec![0.0; hd];
    for k in 0..hd {
        let mut az = cell.b_z[k];
        let mut ar = cell.b_r[k];
        for c in 0..id {
            az += cell.w_z.get(k, c) * x[c];
            ar += cell.w_r.get(k, c) * x[c];
        }
        for c in 0..hd {
            az += cell.u_z.get(k, c) * h[c];
            ar += cell.u_r.get(k, c) * h[c];
        }
        z[k] = sig(az);
        r[k] = sig(ar);
    }
    for k in 0..hd {
        let mut a = cell.b_h[k];
        for c in 0..id {
            a += cell.w_h.get(k, c) * x[c];
        }
        for c in 0..hd {
            a += cell.u_h.get(k, c) * (r[c] * h[c]);
        }
        out[k] = (1.0 - z[k]) * h[k] + z[k] * a.tanh();
    }
    out
}

pub struct OracleTrace {
    pub h: Vec<Vec<f64>>,
    pub d: Vec<f64>,
    pub s: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub p: Vec<f64>,
}

/// Whole forward pass with scalar loops: both directions of every layer,
/// document representation, and the sequential three-term head.
pub fn oracle_forward(params: &ModelParams, xs: &[Vec<f64>]) -> OracleTrace {
    let n = xs.len();
    let hd = params.dims.hidden;
    let mut inputs = xs.to_vec();
    for layer in &params.encoder {
        let mut fwd = vec![vec![0.0; hd]; n];
        let mut prev = vec![0.0; hd];
        for j in 0..n {
            prev = oracle_gru(&layer.forward, &inputs[j], &prev);
            fwd[j] = prev.clone();
        }
        let mut bwd = vec![vec![0.0; hd]; n];
        let mut prev = vec![0.0; hd];
        for j in (0..n).rev() {
            prev = oracle_gru(&layer.backward, &inputs[j], &prev);
            bwd[j] = prev.clone();
        }
        inputs = (0..n).map(|j| [fwd[j].clone(), bwd[j].clone()].concat()).collect();
    }
    let h = inputs;
    let sd = 2 * hd;
    let dd = params.dims.doc;
    let head = &params.head;
    let mut mean = vec![0.0; sd];
    for hj in &h {
        for k in 0..sd {
            mean[k] += hj[k] / n as f64;
        }
    }
    let d: Vec<f64> = (0..dd)
        .map(|r| {
            let mut a = head.b_doc[r];
            for c in 0..sd {
                a += head.w_doc.get(r, c) * mean[c];
            }
            a.tanh()
        })
        .collect();

    let mut s: Vec<f64> = vec![0.0; sd];
    let mut trace = OracleTrace {
        h: h.clone(),
        d: d.clone(),
        s: Vec::new(),
        logits: Vec::new(),
        p: Vec::new(),
    };
    for hj in &h {
        let mut content = 0.0;
        for k in 0..sd {
            content += head.w_content[k] * hj[k];
        }
        let mut salience = 0.0;
        for a in 0..sd {
            for b in 0..dd {
                salience += hj[a] * head.w_salience.get(a, b) * d[b];
            }
        }
        let mut novelty = 0.0;
        for a in 0..sd {
            for b in 0..sd {
                novelty += hj[a] * head.w_novelty.get(a, b) * s[b].tanh();
            }
        }
        let logit = content + salience - novelty + head.bias;
        let p = sig(logit.clamp(-30.0, 30.0));
        trace.s.push(s.clone());
        trace.logits.push(logit);
        trace.p.push(p);
        for k in 0..sd {
            s[k] += p * hj[k];
        }
    }
    trace
}

pub fn oracle_loss(p: &[f64], y: &[bool]) -> f64 {
    -p.iter()
        .zip(y)
        .map(|(&p, &y)| if y { p.ln() } else { (1.0 - p).ln() })
        .sum::<f64>()
        / p.len() as f64
}

pub fn assert_close(a: &[f64], b: &[f64], tol: f64, what: &str) {
    assert_eq!(a.len(), b.len(), "{what}: length");
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert!((x - y).abs() <= tol, "{what}[{i}]: {x} vs {y}");
    }
}

pub const MARKER: &str = "marker";

/// Synthetic marker corpus.
///
/// Vocabulary: `MARKER` plus `vocab - 1` filler words `w0, w1, ...`. Filler
/// vectors are drawn from U(-1, 1)^dim; the marker vector is a draw from the
/// same distribution scaled by `marker_scale`. Every document has
/// `sentences` sentences whose word counts come from `lengths`; exactly
/// `marked` of them contain the marker once, the rest only fillers. The
/// abstractive summary is the marked sentences concatenated.
#[derive(Debug, Clone)]
pub struct MarkerCorpus {
    pub docs: usize,
    pub sentences: usize,
    pub marked: usize,
    pub lengths: std::ops::RangeInclusive<usize>,
    pub vocab: usize,
    pub dim: usize,
    pub marker_scale: f64,
    pub seed: u64,
}

impl Default for MarkerCorpus {
    fn default() -> Self {
        MarkerCorpus {
            docs: 200,
            sentences: 20,
            marked: 3,
            lengths: 4..=7,
            vocab: 50,
            dim: 16,
            marker_scale: 1.0,
            seed: 7,
        }
    }
}

impl MarkerCorpus {
    /// Returns the corpus, the vectors and the marker positions per document.
    pub fn build(&self) -> (Vec<Document>, WordVectorStore, Vec<Vec<usize>>) {
        let mut rng = rng(self.seed);
        let dim = self.dim;
        let fillers: Vec<String> = (0..self.vocab - 1).map(|i| format!("w{i}")).collect();
        let mut entries: Vec<(String, Vec<f64>)> = Vec::with_capacity(self.vocab);
        let marker = (0..dim).map(|_| self.marker_scale * rng.gen_range(-1.0..1.0)).collect();
        entries.push((MARKER.to_owned(), marker));
        for w in &fillers {
            entries.push((w.clone(), (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()));
        }
        let store = WordVectorStore::new(dim, entries).expect("consistent dims");

        let mut corpus = Vec::with_capacity(self.docs);
        let mut truth = Vec::with_capacity(self.docs);
        for d in 0..self.docs {
            let mut positions: Vec<usize> = (0..self.sentences).collect();
            positions.shuffle(&mut rng);
            let mut marks = positions[..self.marked].to_vec();
            marks.sort_unstable();
            let mut raw = Vec::with_capacity(self.sentences);
            for j in 0..self.sentences {
                let len = rng.gen_range(self.lengths.clone());
                let mut words: Vec<&str> = (0..len).map(|_| fillers.choose(&mut rng).unwrap().as_str()).collect();
                if marks.contains(&j) {
                    let at = rng.gen_range(0..len);
                    words[at] = MARKER;
                }
                raw.push(format!("{}.", words.join(" ")));
            }
            let summary: Vec<String> = marks.iter().map(|&j| raw[j].clone()).collect();
            corpus.push(Document::new(format!("doc{d:04}"), raw).with_abstractive(summary));
            truth.push(marks);
        }
        (corpus, store, truth)
    }
}

/// Brute-force ROUGE-N on plain strings: list every candidate n-gram, and
/// for each distinct one count its occurrences on both sides by linear scan.
pub fn oracle_rouge(candidate: &[String], reference: &[String], n: usize) -> (f64, f64, f64) {
    let grams = |t: &[String]| -> Vec<Vec<String>> {
        if t.len() < n {
            return Vec::new();
        }
        (0..=t.len() - n).map(|i| t[i..i + n].to_vec()).collect()
    };
    let cand = grams(candidate);
    let refs = grams(reference);
    let mut seen: Vec<&Vec<String>> = Vec::new();
    let mut overlap = 0usize;
    for g in &cand {
        if seen.contains(&g) {
            continue;
        }
        seen.push(g);
        let in_cand = cand.iter().filter(|x| *x == g).count();
        let in_ref = refs.iter().filter(|x| *x == g).count();
        overlap += in_cand.min(in_ref);
    }
    let p = if cand.is_empty() { 0.0 } else { overlap as f64 / cand.len() as f64 };
    let r = if refs.is_empty() { 0.0 } else { overlap as f64 / refs.len() as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

pub fn strings(tokens: &[extsum::corpus::Token]) -> Vec<String> {
    tokens.iter().map(|t| t.as_str().to_owned()).collect()
}

/// Label count rule written with floating-point ceiling.
pub fn oracle_label_count(n: usize) -> usize {
    ((0.1 * n as f64).ceil() as usize).max(3).min(n)
}

/// Scores every sentence with the brute-force ROUGE-1 F1 and picks the
/// top sentences by repeated arg-max (earliest index wins ties).
pub fn oracle_labels(doc: &Document) -> (Vec<f64>, Vec<bool>) {
    let summary: Vec<String> = doc
        .abstractive
        .as_ref()
        .unwrap()
        .iter()
        .flat_map(|s| strings(&s.tokens))
        .collect();
    let scores: Vec<f64> = doc
        .sentences
        .iter()
        .map(|s| oracle_rouge(&strings(&s.tokens), &summary, 1).2)
        .collect();
    let n = doc.sentences.len();
    let mut labels = vec![false; n];
    for _ in 0..oracle_label_count(n) {
        let mut best: Option<usize> = None;
        for i in 0..n {
            if labels[i] {
                continue;
            }
            if best.is_none_or(|b| scores[i] > scores[b]) {
                best = Some(i);
            }
        }
        labels[best.unwrap()] = true;
    }
    (scores, labels)
}

/// A document of `n` random sentences over a small alphabet and a summary
/// built from a few random words plus fragments of random sentences.
pub fn random_labeler_doc(id: usize, n: usize, rng: &mut impl Rng) -> Document {
    const WORDS: [&str; 12] = [
        "market", "rates", "bank", "rose", "fell", "today", "the", "of", "growth", "report", "said", "shares",
    ];
    let sentence = |rng: &mut dyn rand::RngCore| -> String {
        let len = rng.gen_range(1..=10);
        let words: Vec<&str> = (0..len).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect();
        format!("{}.", words.join(" "))
    };
    let sentences: Vec<String> = (0..n).map(|_| sentence(rng)).collect();
    let summary: Vec<String> = (0..rng.gen_range(1..=4))
        .map(|_| {
            if rng.gen_bool(0.5) {
                sentences[rng.gen_range(0..n)].clone()
            } else {
                sentence(rng)
            }
        })
        .collect();
    Document::new(format!("d{id}"), sentences).with_abstractive(summary)
}

pub const FD_EPS: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;

fn loss_at(params: &ModelParams, xs: &[Vec<f64>], ys: &[bool]) -> f64 {
    let trace = forward(params, xs).unwrap();
    backward(params, &trace, ys).unwrap().0
}

fn perturbed(params: &ModelParams, flat: usize, delta: f64) -> ModelParams {
    let mut p = params.clone();
    let mut offset = 0;
    for t in p.tensors_mut() {
        if flat < offset + t.len() {
            t[flat - offset] += delta;
            return p;
        }
        offset += t.len();
    }
    panic!("coordinate {flat} out of range");
}

/// Largest relative error between analytic and central-difference gradients.
pub fn max_fd_error(params: &ModelParams, xs: &[Vec<f64>], ys: &[bool]) -> (f64, String) {
    let trace = forward(params, xs).unwrap();
    let (_, grads) = backward(params, &trace, ys).unwrap();
    let names: Vec<(String, usize)> = grads
        .named_tensors()
        .into_iter()
        .flat_map(|(n, t)| (0..t.len()).map(move |i| (n.clone(), i)))
        .collect();
    let analytic: Vec<f64> = grads.values().collect();
    let mut worst = (0.0, String::new());
    for (k, &a) in analytic.iter().enumerate() {
        let up = loss_at(&perturbed(params, k, FD_EPS), xs, ys);
        let down = loss_at(&perturbed(params, k, -FD_EPS), xs, ys);
        let fd = (up - down) / (2.0 * FD_EPS);
        let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
        if rel > worst.0 {
            worst = (rel, format!("{}[{}]: analytic {a:e}, fd {fd:e}", names[k].0, names[k].1));
        }
    }
    worst
}
