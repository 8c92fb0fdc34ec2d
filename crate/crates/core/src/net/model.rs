use super::gru::{GruCellParams, GruStep};
use super::tensor::{axpy, dot, sigmoid, softplus};
use super::{BiGruLayer, ClassifierParams, ModelParams, NetError};

/// Logits are clamped to `[-LOGIT_CLAMP, LOGIT_CLAMP]` before the sigmoid,
/// which keeps every probability strictly inside (0, 1).
pub const LOGIT_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
struct DirectionTrace {
    /// `steps[j]` is the step taken at sentence `j`, whatever the direction.
    steps: Vec<GruStep>,
}

#[derive(Debug, Clone, PartialEq)]
struct LayerTrace {
    inputs: Vec<Vec<f64>>,
    forward: DirectionTrace,
    backward: DirectionTrace,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    layers: Vec<LayerTrace>,
    /// Top-layer bidirectional states, one per sentence.
    pub h: Vec<Vec<f64>>,
    pub mean_h: Vec<f64>,
    /// Document representation.
    pub d: Vec<f64>,
    /// Accumulated summary state before each sentence; `s[0]` is zero.
    pub s: Vec<Vec<f64>>,
    tanh_s: Vec<Vec<f64>>,
    /// Unclamped logits.
    pub logits: Vec<f64>,
    /// Selection probabilities.
    pub p: Vec<f64>,
}

impl ForwardTrace {
    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

fn run_direction(cell: &GruCellParams, inputs: &[Vec<f64>], reverse: bool) -> DirectionTrace {
    let n = inputs.len();
    let zero = vec![0.0; cell.hidden_dim()];
    let mut steps: Vec<Option<GruStep>> = vec![None; n];
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..n).rev())
    } else {
        Box::new(0..n)
    };
    let mut prev: Option<usize> = None;
    for j in order {
        let h_prev = prev.map_or(zero.as_slice(), |p| steps[p].as_ref().expect("visited").h.as_slice());
        let step = cell.step(&inputs[j], h_prev);
        steps[j] = Some(step);
        prev = Some(j);
    }
    DirectionTrace {
        steps: steps.into_iter().map(|s| s.expect("every position visited")).collect(),
    }
}

fn run_layer(layer: &BiGruLayer, inputs: Vec<Vec<f64>>) -> LayerTrace {
    let forward = run_direction(&layer.forward, &inputs, false);
    let backward = run_direction(&layer.backward, &inputs, true);
    LayerTrace {
        inputs,
        forward,
        backward,
    }
}

fn layer_outputs(trace: &LayerTrace) -> Vec<Vec<f64>> {
    trace
        .forward
        .steps
        .iter()
        .zip(&trace.backward.steps)
        .map(|(f, b)| f.h.iter().chain(&b.h).copied().collect())
        .collect()
}

fn check_inputs<E: AsRef<[f64]>>(params: &ModelParams, embeddings: &[E]) -> Result<(), NetError> {
    if embeddings.is_empty() {
        return Err(NetError::EmptySequence);
    }
    for e in embeddings {
        NetError::check_len("sentence embedding", params.dims.input, e.as_ref().len())?;
    }
    Ok(())
}

struct Encoded {
    layers: Vec<LayerTrace>,
    h: Vec<Vec<f64>>,
    mean_h: Vec<f64>,
    d: Vec<f64>,
}

fn encode_traced(params: &ModelParams, inputs: Vec<Vec<f64>>) -> Encoded {
    let mut layers = Vec::with_capacity(params.encoder.len());
    let mut current = inputs;
    for layer in &params.encoder {
        let trace = run_layer(layer, current);
        current = layer_outputs(&trace);
        layers.push(trace);
    }
    let h = current;
    let n = h.len() as f64;
    let mut mean_h = vec![0.0; params.dims.state()];
    for hj in &h {
        axpy(1.0, hj, &mut mean_h);
    }
    mean_h.iter_mut().for_each(|v| *v /= n);
    let mut d = params.head.b_doc.clone();
    params.head.w_doc.mul_vec_add(&mean_h, &mut d);
    d.iter_mut().for_each(|v| *v = v.tanh());
    Encoded { layers, h, mean_h, d }
}

/// Runs the bidirectional encoder; returns per-sentence states and the
/// document representation.
pub fn encode<E: AsRef<[f64]>>(params: &ModelParams, embeddings: &[E]) -> Result<(Vec<Vec<f64>>, Vec<f64>), NetError> {
    check_inputs(params, embeddings)?;
    let enc = encode_traced(params, embeddings.iter().map(|e| e.as_ref().to_vec()).collect());
    Ok((enc.h, enc.d))
}

struct Classified {
    s: Vec<Vec<f64>>,
    tanh_s: Vec<Vec<f64>>,
    logits: Vec<f64>,
    p: Vec<f64>,
}

fn classify_traced(head: &ClassifierParams, h: &[Vec<f64>], d: &[f64]) -> Classified {
    let state = head.state_dim();
    let salience = head.w_salience.mul_vec(d);
    let mut s_cur: Vec<f64> = vec![0.0; state];
    let mut out = Classified {
        s: Vec::with_capacity(h.len()),
        tanh_s: Vec::with_capacity(h.len()),
        logits: Vec::with_capacity(h.len()),
        p: Vec::with_capacity(h.len()),
    };
    for hj in h {
        let tanh_s: Vec<f64> = s_cur.iter().map(|v| v.tanh()).collect();
        let logit = dot(&head.w_content, hj) + dot(hj, &salience) - head.w_novelty.bilinear(hj, &tanh_s)
            + head.bias;
        let p = sigmoid(logit.clamp(-LOGIT_CLAMP, LOGIT_CLAMP));
        out.s.push(s_cur.clone());
        out.tanh_s.push(tanh_s);
        out.logits.push(logit);
        out.p.push(p);
        axpy(p, hj, &mut s_cur);
    }
    out
}

/// Sequential scoring of encoded sentences; returns probabilities and the
/// summary state seen by each sentence.
pub fn classify(head: &ClassifierParams, h: &[Vec<f64>], d: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>), NetError> {
    NetError::check_len("document representation", head.doc_dim(), d.len())?;
    for hj in h {
        NetError::check_len("sentence state", head.state_dim(), hj.len())?;
    }
    let c = classify_traced(head, h, d);
    Ok((c.p, c.s))
}

pub fn forward<E: AsRef<[f64]>>(params: &ModelParams, embeddings: &[E]) -> Result<ForwardTrace, NetError> {
    check_inputs(params, embeddings)?;
    let enc = encode_traced(params, embeddings.iter().map(|e| e.as_ref().to_vec()).collect());
    let c = classify_traced(&params.head, &enc.h, &enc.d);
    Ok(ForwardTrace {
        layers: enc.layers,
        h: enc.h,
        mean_h: enc.mean_h,
        d: enc.d,
        s: c.s,
        tanh_s: c.tanh_s,
        logits: c.logits,
        p: c.p,
    })
}

fn bce_loss(trace: &ForwardTrace, targets: &[bool]) -> f64 {
    let total: f64 = trace
        .logits
        .iter()
        .zip(targets)
        .map(|(&logit, &y)| {
            let z = logit.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
            if y {
                softplus(-z)
            } else {
                softplus(z)
            }
        })
        .sum();
    total / targets.len() as f64
}

/// Mean binary cross-entropy and its exact gradient with respect to every
/// parameter, including the path through the summary-state recurrence.
pub fn backward(params: &ModelParams, trace: &ForwardTrace, targets: &[bool]) -> Result<(f64, ModelParams), NetError> {
    NetError::check_len("targets", trace.len(), targets.len())?;
    let n = trace.len();
    let state = params.dims.state();
    let head = &params.head;
    let loss = bce_loss(trace, targets);

    let mut grads = ModelParams::zeros(params.dims);
    let mut dh: Vec<Vec<f64>> = vec![vec![0.0; state]; n];
    let mut dd = vec![0.0; params.dims.doc];
    let salience = head.w_salience.mul_vec(&trace.d);
    let mut salience_dir = vec![0.0; state];
    // ∂L/∂s_{j+1}
    let mut ds_next = vec![0.0; state];

    for j in (0..n).rev() {
        let hj = &trace.h[j];
        let p = trace.p[j];
        let y = if targets[j] { 1.0 } else { 0.0 };

        // s_{j+1} = s_j + p_j h_j
        let dp_state = dot(&ds_next, hj);
        axpy(p, &ds_next, &mut dh[j]);

        let inside = trace.logits[j].abs() <= LOGIT_CLAMP;
        let dlogit = if inside {
            (p - y) / n as f64 + dp_state * p * (1.0 - p)
        } else {
            0.0
        };

        let mut ds = ds_next;
        if dlogit != 0.0 {
            let tanh_s = &trace.tanh_s[j];
            axpy(dlogit, hj, &mut grads.head.w_content);
            axpy(dlogit, &head.w_content, &mut dh[j]);

            grads.head.w_salience.add_outer(dlogit, hj, &trace.d);
            axpy(dlogit, &salience, &mut dh[j]);
            axpy(dlogit, hj, &mut salience_dir);

            grads.head.w_novelty.add_outer(-dlogit, hj, tanh_s);
            let novelty = head.w_novelty.mul_vec(tanh_s);
            axpy(-dlogit, &novelty, &mut dh[j]);
            let mut dtanh = vec![0.0; state];
            head.w_novelty.tr_mul_vec_add(hj, &mut dtanh);
            for k in 0..state {
                ds[k] -= dlogit * dtanh[k] * (1.0 - tanh_s[k] * tanh_s[k]);
            }

            grads.head.bias += dlogit;
        }
        ds_next = ds;
    }

    // salience: Σ_j dlogit_j h_jᵀ W_s d  ⇒  ∂/∂d = W_sᵀ Σ_j dlogit_j h_j
    head.w_salience.tr_mul_vec_add(&salience_dir, &mut dd);

    // d = tanh(W_doc · mean(h) + b_doc)
    let da: Vec<f64> = dd.iter().zip(&trace.d).map(|(g, d)| g * (1.0 - d * d)).collect();
    grads.head.w_doc.add_outer(1.0, &da, &trace.mean_h);
    axpy(1.0, &da, &mut grads.head.b_doc);
    let mut dmean = vec![0.0; state];
    head.w_doc.tr_mul_vec_add(&da, &mut dmean);
    for dhj in &mut dh {
        axpy(1.0 / n as f64, &dmean, dhj);
    }

    let mut d_out = dh;
    for (l, (layer, lt)) in params.encoder.iter().zip(&trace.layers).enumerate().rev() {
        let want_inputs = l > 0;
        let grad_layer = &mut grads.encoder[l];
        d_out = layer_backward(layer, grad_layer, lt, &d_out, want_inputs);
    }
    Ok((loss, grads))
}

/// Backpropagates `d_out` (per-sentence gradients of the concatenated
/// states) through both directions; returns gradients of the inputs when
/// requested, otherwise an empty vector.
#[allow(clippy::needless_range_loop)]
fn layer_backward(
    layer: &BiGruLayer,
    grads: &mut BiGruLayer,
    trace: &LayerTrace,
    d_out: &[Vec<f64>],
    want_inputs: bool,
) -> Vec<Vec<f64>> {
    let n = d_out.len();
    let hidden = layer.forward.hidden_dim();
    let input = layer.forward.input_dim();
    let zero = vec![0.0; hidden];
    let mut d_in: Vec<Vec<f64>> = if want_inputs {
        vec![vec![0.0; input]; n]
    } else {
        Vec::new()
    };

    let mut carry = vec![0.0; hidden];
    for j in (0..n).rev() {
        let dh: Vec<f64> = d_out[j][..hidden].iter().zip(&carry).map(|(a, b)| a + b).collect();
        let h_prev = if j == 0 { &zero } else { &trace.forward.steps[j - 1].h };
        let mut next_carry = vec![0.0; hidden];
        layer.forward.step_backward(
            &mut grads.forward,
            &trace.inputs[j],
            h_prev,
            &trace.forward.steps[j],
            &dh,
            d_in.get_mut(j).map(Vec::as_mut_slice),
            &mut next_carry,
        );
        carry = next_carry;
    }

    let mut carry = vec![0.0; hidden];
    for j in 0..n {
        let dh: Vec<f64> = d_out[j][hidden..].iter().zip(&carry).map(|(a, b)| a + b).collect();
        let h_prev = if j + 1 == n { &zero } else { &trace.backward.steps[j + 1].h };
        let mut next_carry = vec![0.0; hidden];
        layer.backward.step_backward(
            &mut grads.backward,
            &trace.inputs[j],
            h_prev,
            &trace.backward.steps[j],
            &dh,
            d_in.get_mut(j).map(Vec::as_mut_slice),
            &mut next_carry,
        );
        carry = next_carry;
    }
    d_in
}
