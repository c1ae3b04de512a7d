//! Generation from any left-to-right token model: ancestral sampling and
//! beam search for `argmax_d S(d|c)`.
//!
//! `<s>` and `<unk>` are never generated and `</s>` is not allowed as the
//! first token, so every output is a nonempty description. Beam scores are
//! the model's own log-probabilities (nothing is renormalized), so the
//! score of a returned sequence equals its `score_description`.

use rand::{Rng, RngCore};

use crate::corpus::{ColorHsv, END_ID, START_ID, UNK_ID};

pub const DEFAULT_BEAM_WIDTH: usize = 10;
pub const DEFAULT_MAX_LEN: usize = 20;

pub trait StepDecoder {
    type State: Clone;

    /// State before any token has been read.
    fn start(&self, c: &ColorHsv) -> Self::State;

    /// Reads `token` and returns the new state plus natural-log
    /// probabilities of every possible next token.
    fn advance(&self, state: &Self::State, token: usize) -> (Self::State, Vec<f64>);

    fn vocab_size(&self) -> usize;
}

fn allowed(id: usize, depth: usize) -> bool {
    !(id == START_ID || id == UNK_ID || (id == END_ID && depth == 0))
}

/// Draws one sequence of content ids (without sentinels). After `max_len`
/// content tokens `</s>` is forced.
pub fn sample_ids<D: StepDecoder>(
    model: &D,
    c: &ColorHsv,
    rng: &mut dyn RngCore,
    max_len: usize,
) -> Vec<usize> {
    let mut state = model.start(c);
    let mut token = START_ID;
    let mut out = Vec::new();
    while out.len() < max_len.max(1) {
        let (next, lp) = model.advance(&state, token);
        state = next;
        let depth = out.len();
        let weights: Vec<f64> = lp
            .iter()
            .enumerate()
            .map(|(id, &l)| if allowed(id, depth) { l.exp() } else { 0.0 })
            .collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = None;
        for (id, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            pick = Some(id);
            if u < w {
                break;
            }
            u -= w;
        }
        match pick {
            Some(END_ID) | None => break,
            Some(id) => {
                out.push(id);
                token = id;
            }
        }
    }
    out
}

/// A completed hypothesis: content ids and total log-probability
/// including `</s>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub ids: Vec<usize>,
    pub log_prob: f64,
}

#[derive(Clone)]
struct Hyp<S> {
    ids: Vec<usize>,
    log_prob: f64,
    state: S,
}

fn better(a: &Scored, b: &Scored) -> bool {
    a.log_prob > b.log_prob || (a.log_prob == b.log_prob && a.ids < b.ids)
}

/// Beam search over sequences of at most `max_len` content tokens.
/// Width 1 is greedy decoding. For wider beams the greedy completion is
/// kept as a candidate, so the result never scores below greedy.
pub fn beam_search<D: StepDecoder>(
    model: &D,
    c: &ColorHsv,
    width: usize,
    max_len: usize,
) -> Scored {
    let width = width.max(1);
    let max_len = max_len.max(1);
    let mut best = if width > 1 {
        Some(beam_search(model, c, 1, max_len))
    } else {
        None
    };
    let consider = |best: &mut Option<Scored>, cand: Scored| {
        if best.as_ref().is_none_or(|b| better(&cand, b)) {
            *best = Some(cand);
        }
    };

    let (state, lp) = model.advance(&model.start(c), START_ID);
    let mut frontier: Vec<(Hyp<D::State>, Vec<f64>)> = vec![(
        Hyp {
            ids: Vec::new(),
            log_prob: 0.0,
            state,
        },
        lp,
    )];
    for depth in 0..=max_len {
        let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
        for (h, (hyp, lp)) in frontier.iter().enumerate() {
            if depth > 0 {
                consider(
                    &mut best,
                    Scored {
                        ids: hyp.ids.clone(),
                        log_prob: hyp.log_prob + lp[END_ID],
                    },
                );
            }
            if depth == max_len {
                continue;
            }
            for (id, &l) in lp.iter().enumerate() {
                if id != END_ID && allowed(id, depth) {
                    candidates.push((h, id, hyp.log_prob + l));
                }
            }
        }
        if candidates.is_empty() {
            break;
        }
        candidates.sort_by(|a, b| {
            b.2.total_cmp(&a.2)
                .then_with(|| a.0.cmp(&b.0))
                .then_with(|| a.1.cmp(&b.1))
        });
        candidates.truncate(width);
        // log-probabilities only decrease, so a completed hypothesis that
        // beats every live prefix cannot be overtaken
        if let Some(b) = &best {
            if b.log_prob >= candidates[0].2 {
                break;
            }
        }
        frontier = candidates
            .into_iter()
            .map(|(h, id, log_prob)| {
                let parent = &frontier[h].0;
                let (state, lp) = model.advance(&parent.state, id);
                let mut ids = parent.ids.clone();
                ids.push(id);
                (
                    Hyp {
                        ids,
                        log_prob,
                        state,
                    },
                    lp,
                )
            })
            .collect();
    }
    best.expect("at least one hypothesis completes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Same next-token distribution at every step.
    struct Fixed(Vec<f64>);

    impl StepDecoder for Fixed {
        type State = ();
        fn start(&self, _: &ColorHsv) {}
        fn advance(&self, _: &(), _: usize) -> ((), Vec<f64>) {
            ((), self.0.iter().map(|p| p.ln()).collect())
        }
        fn vocab_size(&self) -> usize {
            self.0.len()
        }
    }

    fn black() -> ColorHsv {
        ColorHsv::new(0.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn sampling_respects_max_len_and_never_emits_unk() {
        let m = Fixed(vec![0.0, 0.05, 0.5, 0.25, 0.2]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let s = sample_ids(&m, &black(), &mut rng, 2);
            assert!(!s.is_empty() && s.len() <= 2);
            assert!(s.iter().all(|&id| id >= 3));
        }
    }

    #[test]
    fn first_token_frequencies_match_distribution() {
        // first step: </s> and <unk> masked, so {3: 0.5, 4: 0.3, 5: 0.2}
        let m = Fixed(vec![0.0, 0.1, 0.1, 0.4, 0.24, 0.16]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut counts = [0usize; 6];
        for _ in 0..n {
            counts[sample_ids(&m, &black(), &mut rng, 3)[0]] += 1;
        }
        for (id, p) in [(3, 0.5), (4, 0.3), (5, 0.2)] {
            assert!((counts[id] as f64 / n as f64 - p).abs() < 0.01);
        }
    }

    #[test]
    fn degenerate_distribution_is_deterministic() {
        let m = Fixed(vec![0.0, 1e-300, 0.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let first = sample_ids(&m, &black(), &mut rng, 4);
        for _ in 0..50 {
            assert_eq!(sample_ids(&m, &black(), &mut rng, 4), first);
        }
    }

    #[test]
    fn beam_prefers_short_complete_sequence() {
        let m = Fixed(vec![0.0, 0.6, 0.0, 0.3, 0.1]);
        let best = beam_search(&m, &black(), 5, 4);
        assert_eq!(best.ids, vec![3]);
        assert!((best.log_prob - (0.3f64.ln() + 0.6f64.ln())).abs() < 1e-12);
    }
}
