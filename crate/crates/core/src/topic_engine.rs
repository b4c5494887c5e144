//! Topic detection for MP-authored tweets.
//!
//! Replies rarely contain enough context to infer what they are about, so
//! topics are detected on the politician's own tweet and inherited by its
//! replies. Detection shares the abuse engine's tokenizer, which means
//! hashtags contribute ("#Brexit" finds the europe/brexit topic).

use crate::abuse_engine::tokenize;
use crate::lexicon::{CompiledLexicon, PatternPayload};
use std::collections::BTreeSet;

/// Pseudo-topic assigned when a parent tweet matches nothing, so that every
/// reply has at least one topic to aggregate under.
pub const OTHER_TOPIC: &str = "other";

/// One topic found in a tweet, with the term and token span that found it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicMatch {
    pub topic: String,
    pub term: String,
    pub start: usize,
    pub end: usize,
}

/// Find each distinct topic in `text`, keeping the leftmost occurrence
/// (ties broken by term) as its witness. A tweet mentioning a topic five
/// times is about it once.
pub fn detect_topics(text: &str, lex: &CompiledLexicon) -> Vec<TopicMatch> {
    let tokens = tokenize(text, lex);
    let keys: Vec<Option<&str>> = tokens
        .iter()
        .map(|t| match t.kind {
            crate::abuse_engine::TokenKind::Word | crate::abuse_engine::TokenKind::Hashtag { .. }
                if !t.norm.is_empty() =>
            {
                Some(t.norm.as_str())
            }
            _ => None,
        })
        .collect();
    let mut best: std::collections::BTreeMap<usize, TopicMatch> = std::collections::BTreeMap::new();
    for hit in lex.token_matches(&keys) {
        let PatternPayload::Topic { topic } = *lex.payload(hit.pattern) else {
            continue;
        };
        let candidate = TopicMatch {
            topic: lex.topic_name(topic).to_string(),
            term: lex.pattern_string(hit.pattern).to_string(),
            start: hit.start,
            end: hit.end,
        };
        match best.get(&topic) {
            Some(cur) if (cur.start, &cur.term) <= (candidate.start, &candidate.term) => {}
            _ => {
                best.insert(topic, candidate);
            }
        }
    }
    let mut out: Vec<TopicMatch> = best.into_values().collect();
    out.sort_by(|a, b| (a.start, &a.topic).cmp(&(b.start, &b.topic)));
    out
}

/// Just the topic names, for inheritance bookkeeping.
pub fn topic_set(text: &str, lex: &CompiledLexicon) -> BTreeSet<String> {
    detect_topics(text, lex)
        .into_iter()
        .map(|m| m.topic)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::CompiledLexicon;
    use std::collections::BTreeMap;

    fn lex() -> CompiledLexicon {
        let mut topics = BTreeMap::new();
        topics.insert(
            "europe/brexit".to_string(),
            vec![
                "brexit".to_string(),
                "eu".to_string(),
                "customs union".to_string(),
            ],
        );
        topics.insert(
            "health/nhs".to_string(),
            vec!["nhs".to_string(), "hospital".to_string()],
        );
        CompiledLexicon::compile(Vec::new(), topics)
    }

    #[test]
    fn detects_a_topic_case_insensitively() {
        let found = detect_topics("We must deliver Brexit", &lex());
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].topic, "europe/brexit");
        assert_eq!(found[0].term, "brexit");
        assert_eq!((found[0].start, found[0].end), (3, 4));
    }

    #[test]
    fn multiword_terms_and_hashtags_count() {
        let found = detect_topics("the customs union question", &lex());
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].term, "customs union");

        let found = detect_topics("#Brexit now", &lex());
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].topic, "europe/brexit");
    }

    #[test]
    fn repeated_mentions_collapse_to_the_leftmost() {
        let found = detect_topics("brexit brexit eu brexit", &lex());
        assert_eq!(found.len(), 1);
        assert_eq!((found[0].start, found[0].term.as_str()), (0, "brexit"));
    }

    #[test]
    fn distinct_topics_are_reported_in_span_order() {
        let found = detect_topics("fix the NHS before brexit", &lex());
        let names: Vec<&str> = found.iter().map(|m| m.topic.as_str()).collect();
        assert_eq!(names, vec!["health/nhs", "europe/brexit"]);
    }

    #[test]
    fn no_match_means_empty_not_other() {
        // The pseudo-topic is attached at attribution time, not detection.
        assert!(detect_topics("good morning all", &lex()).is_empty());
        assert!(topic_set("good morning all", &lex()).is_empty());
    }
}
