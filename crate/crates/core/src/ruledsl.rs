//! Boolean keyword filtering rules: a small DSL of phrases combined with
//! `&&`, `||`/`OR`, and parentheses, evaluated against post text.
//!
//! Matching is token-based, not substring-based: text is lowercased and
//! split into tokens (runs of letters, digits, `#`, `-`), and a phrase
//! matches iff its token sequence appears contiguously. `asap` therefore
//! never matches inside an unrelated longer word, and `#saveriau` is one
//! token. There is no stemming and no morphology; keywords are literal.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::GeoPost;

/// The four canonical topic names shipped with the built-in rule fixture.
pub const CANONICAL_TAXONOMIES: [&str; 4] =
    ["haze-general", "haze-hashtag", "haze-impact", "haze-health"];

const BUILTIN_TAXONOMY_SOURCE: &str = include_str!("../data/taxonomies.txt");

#[derive(Debug, Error, PartialEq)]
pub enum SyntaxError {
    #[error("at byte {position}: {message}")]
    Invalid { position: usize, message: String },
}

impl SyntaxError {
    fn new(position: usize, message: impl Into<String>) -> Self {
        SyntaxError::Invalid {
            position,
            message: message.into(),
        }
    }
}

/// A boolean expression over keyword phrases.
///
/// Built only through [`RuleExpr::phrase`], [`RuleExpr::and`], and
/// [`RuleExpr::or`], which keep the tree canonical: no empty phrases, no
/// connective with fewer than two children, and no directly nested
/// connective of the same kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleExpr {
    Phrase(Vec<String>),
    And(Vec<RuleExpr>),
    Or(Vec<RuleExpr>),
}

impl RuleExpr {
    pub fn phrase<T: Into<String>>(tokens: Vec<T>) -> RuleExpr {
        let tokens: Vec<String> = tokens
            .into_iter()
            .map(|t| t.into().to_lowercase())
            .collect();
        assert!(
            !tokens.is_empty() && tokens.iter().all(|t| !t.is_empty()),
            "phrase tokens must be non-empty"
        );
        RuleExpr::Phrase(tokens)
    }

    pub fn and(children: Vec<RuleExpr>) -> RuleExpr {
        Self::connective(children, true)
    }

    pub fn or(children: Vec<RuleExpr>) -> RuleExpr {
        Self::connective(children, false)
    }

    fn connective(children: Vec<RuleExpr>, is_and: bool) -> RuleExpr {
        let mut flat = Vec::with_capacity(children.len());
        for child in children {
            match (is_and, child) {
                (true, RuleExpr::And(sub)) => flat.extend(sub),
                (false, RuleExpr::Or(sub)) => flat.extend(sub),
                (_, other) => flat.push(other),
            }
        }
        match flat.len() {
            0 => panic!("connective needs at least one child"),
            1 => flat.into_iter().next().unwrap(),
            _ if is_and => RuleExpr::And(flat),
            _ => RuleExpr::Or(flat),
        }
    }

    /// Distinct phrases appearing as leaves of this expression.
    pub fn phrases(&self) -> BTreeSet<Vec<String>> {
        let mut out = BTreeSet::new();
        self.collect_phrases(&mut out);
        out
    }

    fn collect_phrases(&self, out: &mut BTreeSet<Vec<String>>) {
        match self {
            RuleExpr::Phrase(tokens) => {
                out.insert(tokens.clone());
            }
            RuleExpr::And(children) | RuleExpr::Or(children) => {
                for c in children {
                    c.collect_phrases(out);
                }
            }
        }
    }

    fn eval(&self, tokens: &[String]) -> bool {
        match self {
            RuleExpr::Phrase(phrase) => contains_sequence(tokens, phrase),
            RuleExpr::And(children) => children.iter().all(|c| c.eval(tokens)),
            RuleExpr::Or(children) => children.iter().any(|c| c.eval(tokens)),
        }
    }
}

impl fmt::Display for RuleExpr {
    /// Prints a form that re-parses to the identical tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleExpr::Phrase(tokens) => write!(f, "{}", tokens.join(" ")),
            RuleExpr::And(children) => {
                let parts: Vec<String> = children
                    .iter()
                    .map(|c| match c {
                        RuleExpr::Or(_) => format!("({c})"),
                        _ => c.to_string(),
                    })
                    .collect();
                write!(f, "{}", parts.join(" && "))
            }
            RuleExpr::Or(children) => {
                let parts: Vec<String> = children.iter().map(|c| c.to_string()).collect();
                write!(f, "{}", parts.join(" || "))
            }
        }
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '#' || c == '-'
}

/// Lowercase and split text into match tokens. Every character that is not
/// a letter, digit, `#`, or `-` separates tokens.
pub fn tokenize_text(text: &str) -> Vec<String> {
    text.split(|c: char| !is_word_char(c))
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

fn contains_sequence(tokens: &[String], phrase: &[String]) -> bool {
    if phrase.len() > tokens.len() {
        return false;
    }
    tokens
        .windows(phrase.len())
        .any(|w| w.iter().zip(phrase).all(|(a, b)| a == b))
}

/// Evaluates a rule against raw text. Pure function of its inputs.
pub fn matches(rule: &RuleExpr, text: &str) -> bool {
    rule.eval(&tokenize_text(text))
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    LParen,
    RParen,
    AndOp,
    OrOp,
    Word(String),
}

fn lex(source: &str) -> Result<Vec<(Token, usize)>, SyntaxError> {
    let mut tokens = Vec::new();
    let bytes: Vec<(usize, char)> = source.char_indices().collect();
    let mut i = 0;
    while i < bytes.len() {
        let (pos, c) = bytes[i];
        match c {
            '(' => {
                tokens.push((Token::LParen, pos));
                i += 1;
            }
            ')' => {
                tokens.push((Token::RParen, pos));
                i += 1;
            }
            '&' => {
                if i + 1 < bytes.len() && bytes[i + 1].1 == '&' {
                    tokens.push((Token::AndOp, pos));
                    i += 2;
                } else {
                    return Err(SyntaxError::new(pos, "single '&', expected '&&'"));
                }
            }
            '|' => {
                if i + 1 < bytes.len() && bytes[i + 1].1 == '|' {
                    tokens.push((Token::OrOp, pos));
                    i += 2;
                } else {
                    return Err(SyntaxError::new(pos, "single '|', expected '||'"));
                }
            }
            c if c.is_whitespace() => i += 1,
            c if is_word_char(c) => {
                let start = i;
                while i < bytes.len() && is_word_char(bytes[i].1) {
                    i += 1;
                }
                let word: String = bytes[start..i].iter().map(|(_, c)| *c).collect();
                // The bare word OR (exactly uppercase) is an operator; any
                // other word, including lowercase "or", is a keyword.
                if word == "OR" {
                    tokens.push((Token::OrOp, pos));
                } else {
                    tokens.push((Token::Word(word.to_lowercase()), pos));
                }
            }
            other => {
                return Err(SyntaxError::new(pos, format!("unexpected character {other:?}")));
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(_, p)| *p)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    // orExpr := andExpr { ("||" | "OR") andExpr }
    fn or_expr(&mut self) -> Result<RuleExpr, SyntaxError> {
        let mut children = vec![self.and_expr()?];
        while matches!(self.peek(), Some(Token::OrOp)) {
            self.bump();
            children.push(self.and_expr()?);
        }
        Ok(RuleExpr::or(children))
    }

    // andExpr := term { "&&" term }
    fn and_expr(&mut self) -> Result<RuleExpr, SyntaxError> {
        let mut children = vec![self.term()?];
        while matches!(self.peek(), Some(Token::AndOp)) {
            self.bump();
            children.push(self.term()?);
        }
        Ok(RuleExpr::and(children))
    }

    // term := "(" orExpr ")" | phrase
    fn term(&mut self) -> Result<RuleExpr, SyntaxError> {
        match self.peek() {
            Some(Token::LParen) => {
                self.bump();
                let inner = self.or_expr()?;
                match self.bump() {
                    Some(Token::RParen) => Ok(inner),
                    _ => Err(SyntaxError::new(self.here(), "unbalanced '(', expected ')'")),
                }
            }
            Some(Token::Word(_)) => {
                let mut words = Vec::new();
                while let Some(Token::Word(_)) = self.peek() {
                    if let Some(Token::Word(w)) = self.bump() {
                        words.push(w);
                    }
                }
                Ok(RuleExpr::phrase(words))
            }
            Some(Token::RParen) => Err(SyntaxError::new(self.here(), "unexpected ')'")),
            Some(Token::AndOp) | Some(Token::OrOp) => {
                Err(SyntaxError::new(self.here(), "dangling operator, expected a phrase"))
            }
            None => Err(SyntaxError::new(self.here(), "unexpected end of rule")),
        }
    }
}

/// Parses one boolean rule. `&&` binds tighter than `||`/`OR`; phrases are
/// contiguous word sequences; `#`-prefixed and hyphenated tokens are single
/// tokens.
pub fn parse_rule(source: &str) -> Result<RuleExpr, SyntaxError> {
    let tokens = lex(source)?;
    if tokens.is_empty() {
        return Err(SyntaxError::new(0, "empty rule"));
    }
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: source.len(),
    };
    let expr = parser.or_expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(SyntaxError::new(parser.here(), "trailing input after rule"));
    }
    Ok(expr)
}

/// A named topic: an ordered list of rules whose top-level combination
/// is OR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub name: String,
    pub rules: Vec<RuleExpr>,
}

impl Taxonomy {
    /// Number of distinct phrase leaves across all rules of this taxonomy.
    pub fn keyword_count(&self) -> usize {
        let mut phrases = BTreeSet::new();
        for rule in &self.rules {
            rule.collect_phrases(&mut phrases);
        }
        phrases.len()
    }

    pub fn matches_text(&self, text: &str) -> bool {
        let tokens = tokenize_text(text);
        self.rules.iter().any(|r| r.eval(&tokens))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TaxonomyFileError {
    #[error("line {line}: {source}")]
    Rule {
        line: usize,
        #[source]
        source: SyntaxError,
    },
    #[error("line {line}: rule appears before any [topic] header")]
    RuleOutsideSection { line: usize },
    #[error("line {line}: empty topic name")]
    EmptyTopicName { line: usize },
    #[error("line {line}: duplicate topic {name:?}")]
    DuplicateTopic { line: usize, name: String },
    #[error("no topics defined")]
    Empty,
}

/// Parses taxonomy config text: `[topic-name]` section headers with one
/// rule per line. A `#` at the start of a line opens a comment only when
/// followed by whitespace, so `#saveriau` remains a hashtag keyword.
pub fn parse_taxonomy_file(source: &str) -> Result<Vec<Taxonomy>, TaxonomyFileError> {
    let mut taxonomies: Vec<Taxonomy> = Vec::new();
    for (idx, raw_line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if rest.starts_with(char::is_whitespace) || rest.is_empty() {
                continue;
            }
        }
        if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = header.trim();
            if name.is_empty() {
                return Err(TaxonomyFileError::EmptyTopicName { line: line_no });
            }
            if taxonomies.iter().any(|t| t.name == name) {
                return Err(TaxonomyFileError::DuplicateTopic {
                    line: line_no,
                    name: name.to_string(),
                });
            }
            taxonomies.push(Taxonomy {
                name: name.to_string(),
                rules: Vec::new(),
            });
            continue;
        }
        let rule = parse_rule(line).map_err(|source| TaxonomyFileError::Rule {
            line: line_no,
            source,
        })?;
        match taxonomies.last_mut() {
            Some(t) => t.rules.push(rule),
            None => return Err(TaxonomyFileError::RuleOutsideSection { line: line_no }),
        }
    }
    if taxonomies.is_empty() {
        return Err(TaxonomyFileError::Empty);
    }
    Ok(taxonomies)
}

/// The rule fixture shipped with the crate (the four haze topics).
pub fn builtin_taxonomies() -> Vec<Taxonomy> {
    parse_taxonomy_file(BUILTIN_TAXONOMY_SOURCE).expect("built-in taxonomy fixture parses")
}

/// Raw source text of the built-in fixture, for tooling that wants to
/// copy or display it.
pub fn builtin_taxonomy_source() -> &'static str {
    BUILTIN_TAXONOMY_SOURCE
}

/// Names of every taxonomy the post matches; possibly empty, possibly all.
pub fn classify(post: &GeoPost, taxonomies: &[Taxonomy]) -> BTreeSet<String> {
    classify_text(&post.text, taxonomies)
}

pub fn classify_text(text: &str, taxonomies: &[Taxonomy]) -> BTreeSet<String> {
    let tokens = tokenize_text(text);
    taxonomies
        .iter()
        .filter(|t| t.rules.iter().any(|r| r.eval(&tokens)))
        .map(|t| t.name.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ph(words: &[&str]) -> RuleExpr {
        RuleExpr::phrase(words.to_vec())
    }

    #[test]
    fn parse_paren_and_example() {
        let expr = parse_rule("( A || B ) && C").unwrap();
        assert_eq!(
            expr,
            RuleExpr::and(vec![
                RuleExpr::or(vec![ph(&["a"]), ph(&["b"])]),
                ph(&["c"]),
            ])
        );
    }

    #[test]
    fn parse_multiword_phrase() {
        assert_eq!(parse_rule("kabut asap").unwrap(), ph(&["kabut", "asap"]));
    }

    #[test]
    fn and_binds_tighter_than_or() {
        let expr = parse_rule("A && B || C").unwrap();
        assert_eq!(
            expr,
            RuleExpr::or(vec![
                RuleExpr::and(vec![ph(&["a"]), ph(&["b"])]),
                ph(&["c"]),
            ])
        );
    }

    #[test]
    fn uppercase_or_keyword_is_operator() {
        let expr = parse_rule("asap OR kabut").unwrap();
        assert_eq!(expr, RuleExpr::or(vec![ph(&["asap"]), ph(&["kabut"])]));
        // Lowercase "or" is an ordinary keyword token.
        assert_eq!(parse_rule("or asap").unwrap(), ph(&["or", "asap"]));
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_rule("(asap").unwrap_err() {
            SyntaxError::Invalid { position, .. } => assert_eq!(position, 5),
        }
        assert!(parse_rule("asap &&").is_err());
        assert!(parse_rule("&& asap").is_err());
        assert!(parse_rule("asap ) kabut").is_err());
        assert!(parse_rule("").is_err());
        assert!(parse_rule("a & b").is_err());
    }

    #[test]
    fn matches_examples() {
        let rule = parse_rule("(bencana||badai) && asap").unwrap();
        assert!(matches(&rule, "badai asap melanda"));
        assert!(!matches(&rule, "badai besar melanda"));

        let hashtag = parse_rule("#saveriau").unwrap();
        assert!(matches(&hashtag, "ayo #SaveRiau sekarang"));

        // Phrase order matters.
        let phrase = parse_rule("kabut asap").unwrap();
        assert!(!matches(&phrase, "asap kabut"));
        assert!(matches(&phrase, "ada kabut asap tebal"));
    }

    #[test]
    fn token_match_is_not_substring_match() {
        let rule = parse_rule("asap").unwrap();
        assert!(!matches(&rule, "#melawanasap"));
        assert!(!matches(&rule, "asapnya"));
        assert!(matches(&rule, "asap!"));
    }

    #[test]
    fn hyphenated_token_is_single() {
        let rule = parse_rule("paru-paru").unwrap();
        assert!(matches(&rule, "sakit paru-paru"));
        assert!(!matches(&rule, "sakit paru paru"));
        let bare = parse_rule("paru").unwrap();
        assert!(!matches(&bare, "sakit paru-paru"));
    }

    #[test]
    fn builtin_fixture_parses_with_caption_counts() {
        let taxonomies = builtin_taxonomies();
        let names: Vec<&str> = taxonomies.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, CANONICAL_TAXONOMIES);
        let counts: Vec<usize> = taxonomies.iter().map(|t| t.keyword_count()).collect();
        assert_eq!(counts, vec![43, 5, 39, 39]);
    }

    #[test]
    fn classify_examples() {
        let taxonomies = builtin_taxonomies();
        let got = classify_text("Day #3 off because of Haze", &taxonomies);
        assert_eq!(got.into_iter().collect::<Vec<_>>(), vec!["haze-general"]);

        assert!(classify_text("selamat pagi", &taxonomies).is_empty());

        let got = classify_text("ayo #prayforriau semua pakai masker", &taxonomies);
        assert_eq!(
            got.into_iter().collect::<Vec<_>>(),
            vec!["haze-hashtag", "haze-health"]
        );
    }

    #[test]
    fn comment_rules_in_fixture_format() {
        let src = "# a comment\n[t]\n#saveriau\n";
        let taxonomies = parse_taxonomy_file(src).unwrap();
        assert_eq!(taxonomies[0].rules, vec![ph(&["#saveriau"])]);
        assert!(parse_taxonomy_file("[t]\nasap\n[t]\nkabut").is_err());
        assert!(parse_taxonomy_file("asap").is_err());
    }

    fn arb_rule() -> impl Strategy<Value = RuleExpr> {
        let word = prop::sample::select(vec![
            "asap", "kabut", "haze", "badai", "titik", "api", "masker", "#saveriau",
            "paru-paru", "sekolah", "x1", "y2",
        ]);
        let phrase = prop::collection::vec(word, 1..3).prop_map(RuleExpr::phrase);
        phrase.prop_recursive(3, 24, 4, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 2..4).prop_map(RuleExpr::and),
                prop::collection::vec(inner, 2..4).prop_map(RuleExpr::or),
            ]
        })
    }

    proptest! {
        #[test]
        fn pretty_print_round_trips(rule in arb_rule()) {
            let printed = rule.to_string();
            let reparsed = parse_rule(&printed).unwrap();
            prop_assert_eq!(reparsed, rule);
        }

        #[test]
        fn or_extension_is_monotone(rule in arb_rule(), extra in arb_rule(),
                                    text in "[a-z# ]{0,40}") {
            if matches(&rule, &text) {
                let extended = RuleExpr::or(vec![rule, extra]);
                prop_assert!(matches(&extended, &text));
            }
        }
    }

    #[test]
    fn fixture_rules_round_trip() {
        for taxonomy in builtin_taxonomies() {
            for rule in &taxonomy.rules {
                let reparsed = parse_rule(&rule.to_string()).unwrap();
                assert_eq!(&reparsed, rule);
            }
        }
    }
}
