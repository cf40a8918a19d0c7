//! Corpus BLEU with 13a tokenization or character-level units.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BleuError {
    #[error("{hyps} hypotheses but {refs} references")]
    LengthMismatch { hyps: usize, refs: usize },
    #[error("empty corpus")]
    EmptyCorpus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BleuTokenizer {
    #[serde(rename = "13a")]
    Thirteen,
    #[serde(rename = "char")]
    Char,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Smoothing {
    #[default]
    #[serde(rename = "none")]
    None,
    /// Add one to matches and totals of orders 2..=4.
    #[serde(rename = "add-k")]
    AddOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuScore {
    pub score: f64,
    /// Modified n-gram precisions as fractions, orders 1..=4.
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

struct Rules {
    symbols: Regex,
    period_comma_after: Regex,
    period_comma_before: Regex,
    dash_after_digit: Regex,
}

fn rules() -> &'static Rules {
    static RULES: OnceLock<Rules> = OnceLock::new();
    RULES.get_or_init(|| Rules {
        symbols: Regex::new(r"([\{-~\[-`\x20-&\(-\+:-@/])").unwrap(),
        period_comma_after: Regex::new(r"([^0-9])([\.,])").unwrap(),
        period_comma_before: Regex::new(r"([\.,])([^0-9])").unwrap(),
        dash_after_digit: Regex::new(r"([0-9])(-)").unwrap(),
    })
}

/// The 13a ("mteval-v13a") tokenizer.
pub fn tokenize_13a(text: &str) -> Vec<String> {
    let mut line = text
        .replace("<skipped>", "")
        .replace("-\n", "")
        .replace('\n', " ");
    if line.contains('&') {
        line = line
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    let r = rules();
    let line = format!(" {line} ");
    let line = r.symbols.replace_all(&line, " $1 ");
    let line = r.period_comma_after.replace_all(&line, "$1 $2 ");
    let line = r.period_comma_before.replace_all(&line, " $1 $2");
    let line = r.dash_after_digit.replace_all(&line, "$1 $2 ");
    line.split_whitespace().map(str::to_owned).collect()
}

/// One unit per Unicode scalar; whitespace is dropped.
pub fn tokenize_char(text: &str) -> Vec<String> {
    text.chars()
        .filter(|c| !c.is_whitespace())
        .map(String::from)
        .collect()
}

pub fn tokenize(text: &str, tokenizer: BleuTokenizer) -> Vec<String> {
    match tokenizer {
        BleuTokenizer::Thirteen => tokenize_13a(text),
        BleuTokenizer::Char => tokenize_char(text),
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Flat corpus statistics: clipped matches and totals per order, lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Stats {
    matches: [usize; MAX_ORDER],
    totals: [usize; MAX_ORDER],
    hyp_len: usize,
    ref_len: usize,
}

fn sentence_stats(hyp: &[String], reference: &[String]) -> Stats {
    let mut s = Stats {
        hyp_len: hyp.len(),
        ref_len: reference.len(),
        ..Stats::default()
    };
    for n in 1..=MAX_ORDER {
        let h = ngram_counts(hyp, n);
        let r = ngram_counts(reference, n);
        s.totals[n - 1] = hyp.len().saturating_sub(n - 1);
        s.matches[n - 1] = h
            .iter()
            .map(|(g, c)| (*c).min(r.get(g).copied().unwrap_or(0)))
            .sum();
    }
    s
}

pub fn corpus_bleu(
    hyps: &[&str],
    refs: &[&str],
    tokenizer: BleuTokenizer,
) -> Result<BleuScore, BleuError> {
    corpus_bleu_with(hyps, refs, tokenizer, Smoothing::None)
}

pub fn corpus_bleu_with(
    hyps: &[&str],
    refs: &[&str],
    tokenizer: BleuTokenizer,
    smoothing: Smoothing,
) -> Result<BleuScore, BleuError> {
    if hyps.len() != refs.len() {
        return Err(BleuError::LengthMismatch {
            hyps: hyps.len(),
            refs: refs.len(),
        });
    }
    if hyps.is_empty() {
        return Err(BleuError::EmptyCorpus);
    }
    let mut total = Stats::default();
    for (h, r) in hyps.iter().zip(refs) {
        let s = sentence_stats(&tokenize(h, tokenizer), &tokenize(r, tokenizer));
        for n in 0..MAX_ORDER {
            total.matches[n] += s.matches[n];
            total.totals[n] += s.totals[n];
        }
        total.hyp_len += s.hyp_len;
        total.ref_len += s.ref_len;
    }
    Ok(score_from_stats(&total, smoothing))
}

fn score_from_stats(s: &Stats, smoothing: Smoothing) -> BleuScore {
    let precisions: [f64; MAX_ORDER] = std::array::from_fn(|n| {
        let (mut m, mut t) = (s.matches[n] as f64, s.totals[n] as f64);
        if smoothing == Smoothing::AddOne && n > 0 {
            m += 1.0;
            t += 1.0;
        }
        if t > 0.0 {
            m / t
        } else {
            0.0
        }
    });
    let brevity_penalty = if s.hyp_len == 0 {
        0.0
    } else if s.hyp_len < s.ref_len {
        (1.0 - s.ref_len as f64 / s.hyp_len as f64).exp()
    } else {
        1.0
    };
    let score = if precisions.contains(&0.0) {
        0.0
    } else {
        let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
        brevity_penalty * log_mean.exp() * 100.0
    };
    BleuScore {
        score,
        precisions,
        brevity_penalty,
        hyp_len: s.hyp_len,
        ref_len: s.ref_len,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_13a_examples() {
        // expectations checked against sacreBLEU's Tokenizer13a
        assert_eq!(tokenize_13a("Hello, world!"), toks(&["Hello", ",", "world", "!"]));
        assert_eq!(tokenize_13a("a b"), toks(&["a", "b"]));
        assert!(tokenize_13a("").is_empty());
        assert_eq!(
            tokenize_13a("It costs $3.50, ok?"),
            toks(&["It", "costs", "$", "3.50", ",", "ok", "?"])
        );
        assert_eq!(
            tokenize_13a("e-mail 3-4 a.b"),
            toks(&["e-mail", "3", "-", "4", "a", ".", "b"])
        );
        assert_eq!(tokenize_13a("a &amp; b"), toks(&["a", "&", "b"]));
    }

    #[test]
    fn tokenize_char_examples() {
        assert_eq!(tokenize_char("你好"), toks(&["你", "好"]));
        assert_eq!(tokenize_char("a b"), toks(&["a", "b"]));
        assert_eq!(tokenize_char("ｱﾊﾞ"), toks(&["ｱ", "ﾊ", "ﾞ"]));
    }

    #[test]
    fn identical_corpus_is_perfect() {
        let c = ["the cat sat on the mat", "a b c d e"];
        let b = corpus_bleu(&c, &c, BleuTokenizer::Thirteen).unwrap();
        assert_eq!(b.score, 100.0);
        assert_eq!(b.brevity_penalty, 1.0);
    }

    #[test]
    fn no_four_gram_match_scores_zero() {
        let b = corpus_bleu(&["a b c d"], &["a b c x"], BleuTokenizer::Thirteen).unwrap();
        assert_eq!(b.precisions[3], 0.0);
        assert_eq!(b.score, 0.0);
        let smoothed =
            corpus_bleu_with(&["a b c d"], &["a b c x"], BleuTokenizer::Thirteen, Smoothing::AddOne)
                .unwrap();
        assert!(smoothed.score > 0.0);
    }

    #[test]
    fn pinned_corpora_match_reference_scorer() {
        // sacreBLEU 2.6.0 corpus_bleu values
        let hyps = ["the cat sat on the mat today", "a quick brown fox jumps over the dog"];
        let refs = ["the cat sat on a mat today", "the quick brown fox jumped over the lazy dog"];
        let b = corpus_bleu(&hyps, &refs, BleuTokenizer::Thirteen).unwrap();
        assert!((b.score - 31.621_299_837_751_56).abs() < 0.01);
        assert_eq!((b.hyp_len, b.ref_len), (15, 16));
        assert!((b.brevity_penalty - 0.935_506_985_031_617_8).abs() < 1e-12);

        let hz = ["我喜欢吃苹果和香蕉", "今天天气很好"];
        let rz = ["我很喜欢吃苹果和梨", "今天的天气很好"];
        let c = corpus_bleu(&hz, &rz, BleuTokenizer::Char).unwrap();
        assert!((c.score - 57.773_523_998_916_566).abs() < 0.01);
    }

    #[test]
    fn score_formula_consistency() {
        let b = corpus_bleu(
            &["the cat sat on the mat today"],
            &["the cat sat on a mat today ok"],
            BleuTokenizer::Thirteen,
        )
        .unwrap();
        let geo = b.precisions.iter().map(|p| p.ln()).sum::<f64>() / 4.0;
        assert!((b.score - b.brevity_penalty * geo.exp() * 100.0).abs() < 1e-9);
        assert!(b.brevity_penalty < 1.0);
    }

    #[test]
    fn errors() {
        assert_eq!(
            corpus_bleu(&["a"], &["a", "b"], BleuTokenizer::Char),
            Err(BleuError::LengthMismatch { hyps: 1, refs: 2 })
        );
        assert_eq!(corpus_bleu(&[], &[], BleuTokenizer::Char), Err(BleuError::EmptyCorpus));
    }

    #[test]
    fn empty_hypothesis_scores_zero() {
        let b = corpus_bleu(&[""], &["a b c d"], BleuTokenizer::Thirteen).unwrap();
        assert_eq!(b.score, 0.0);
        assert_eq!(b.hyp_len, 0);
    }

    #[test]
    fn char_and_13a_agree_on_single_char_tokens() {
        // "a,b." tokenizes to single-character tokens under 13a too
        let h = ["a,b.", "xyz!"];
        let r = ["a,b.", "xyq!"];
        let c = corpus_bleu(&h, &r, BleuTokenizer::Char).unwrap();
        let t = corpus_bleu(&h, &r, BleuTokenizer::Thirteen).unwrap();
        assert_eq!(tokenize_13a("a,b."), tokenize_char("a,b."));
        assert_ne!(tokenize_13a("xyz!"), tokenize_char("xyz!"));
        assert_ne!(c.hyp_len, t.hyp_len);
        let single = corpus_bleu(&["a,b."], &["a,b."], BleuTokenizer::Char).unwrap();
        assert_eq!(single, corpus_bleu(&["a,b."], &["a,b."], BleuTokenizer::Thirteen).unwrap());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn sentence() -> impl Strategy<Value = String> {
            proptest::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "the", "."]), 0..12)
                .prop_map(|w| w.join(" "))
        }

        proptest! {
            #[test]
            fn brevity_penalty_bounds(h in sentence(), r in sentence()) {
                let b = corpus_bleu(&[&h], &[&r], BleuTokenizer::Thirteen).unwrap();
                prop_assert!(b.brevity_penalty <= 1.0);
                if b.hyp_len > 0 {
                    prop_assert_eq!(b.brevity_penalty == 1.0, b.hyp_len >= b.ref_len);
                }
            }

            #[test]
            fn pair_permutation_invariance(pairs in proptest::collection::vec((sentence(), sentence()), 1..6), seed in 0usize..100) {
                let hyps: Vec<&str> = pairs.iter().map(|p| p.0.as_str()).collect();
                let refs: Vec<&str> = pairs.iter().map(|p| p.1.as_str()).collect();
                let mut order: Vec<usize> = (0..pairs.len()).collect();
                order.rotate_left(seed % pairs.len());
                order.reverse();
                let ph: Vec<&str> = order.iter().map(|&i| hyps[i]).collect();
                let pr: Vec<&str> = order.iter().map(|&i| refs[i]).collect();
                let a = corpus_bleu(&hyps, &refs, BleuTokenizer::Thirteen).unwrap();
                let b = corpus_bleu(&ph, &pr, BleuTokenizer::Thirteen).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }
}
