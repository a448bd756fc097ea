//! Rule-based phrase extraction.

use crate::corpus::Record;
use crate::text_model::{join_words, split_words, SPECIAL_TOKENS};

fn is_title_case(word: &str) -> bool {
    !SPECIAL_TOKENS.contains(&word)
        && word.chars().next().is_some_and(char::is_uppercase)
        && word.chars().all(char::is_alphanumeric)
}

fn is_year(word: &str) -> bool {
    word.len() == 4 && word.bytes().all(|b| b.is_ascii_digit())
}

/// Candidate sensitive phrases of `text`, in rule order: maximal runs of
/// title-cased words, then four-digit years, then spans between paired
/// double quotes. Later duplicates are dropped.
pub fn extract_phrases(text: &str) -> Vec<String> {
    let words = split_words(text);
    let mut found: Vec<String> = Vec::new();
    let mut push = |s: String| {
        if !s.is_empty() && !found.contains(&s) {
            found.push(s);
        }
    };

    let mut run: Vec<&str> = Vec::new();
    for &w in words.iter().chain(std::iter::once(&"")) {
        if is_title_case(w) {
            run.push(w);
        } else if !run.is_empty() {
            push(join_words(run.drain(..)));
        }
    }

    for &w in &words {
        if is_year(w) {
            push(w.to_owned());
        }
    }

    let mut open: Option<usize> = None;
    for (i, &w) in words.iter().enumerate() {
        if w == "\"" {
            match open.take() {
                Some(start) => push(join_words(words[start + 1..i].iter().copied())),
                None => open = Some(i),
            }
        }
    }
    found
}

/// Phrases of a retrieved record, taken from its reasoning and answer.
pub fn extract_record_phrases(record: &Record) -> Vec<String> {
    extract_phrases(&format!("{} {}", record.cot, record.answer))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic_benchmark, CorpusManifest};

    #[test]
    fn worked_sentence() {
        assert_eq!(
            extract_phrases("Her debut novel Silent Harbor won the 2019 Coastal Prize"),
            vec!["Her", "Silent Harbor", "Coastal Prize", "2019"]
        );
    }

    #[test]
    fn lowercase_text_has_no_phrases() {
        assert!(extract_phrases("the quiet haven was lost in the woods .").is_empty());
    }

    #[test]
    fn repeats_collapse() {
        assert_eq!(
            extract_phrases("Silent Harbor and Silent Harbor in 1999 , 1999"),
            vec!["Silent Harbor", "1999"]
        );
    }

    #[test]
    fn quoted_spans() {
        assert_eq!(
            extract_phrases("she called it \"the long winter\" once"),
            vec!["the long winter"]
        );
    }

    #[test]
    fn reserved_tokens_break_runs() {
        assert_eq!(extract_phrases("Mira <step> Vale"), vec!["Mira", "Vale"]);
    }

    #[test]
    fn benchmark_fragments_are_recovered() {
        let recs = generate_synthetic_benchmark(&CorpusManifest {
            n_questions_per_profile: 6,
            ..CorpusManifest::default()
        })
        .unwrap();
        for r in &recs {
            let got = extract_record_phrases(r);
            for f in &r.sensitive_fragments {
                assert!(got.contains(f), "{f} missing from {got:?}");
            }
        }
    }
}
