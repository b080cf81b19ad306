//! Brute-force and textbook reference implementations used to cross-check
//! the production algorithms. Each function here deliberately takes the
//! most direct route: exhaustive scans, naive loops, and formula-by-the-
//! book arithmetic, sharing no code with the paths it verifies.

use std::collections::BTreeMap;

use chrono::NaiveDate;

use crate::model::{local_day, FireHotspot, GeoPoint, GeoPost, LocalCalendar};
use crate::ruledsl::RuleExpr;

/// Exhaustive O(n*m) same-day nearest-hotspot join. For each post, the
/// minimum great-circle distance over all hotspots of the post's local
/// day, ties broken by smallest hotspot id. `None` when the day has no
/// hotspot.
pub fn oracle_nearest(
    posts: &[GeoPost],
    hotspots: &[FireHotspot],
    cal: &LocalCalendar,
) -> Vec<Option<(String, f64)>> {
    let mut by_day: BTreeMap<NaiveDate, Vec<&FireHotspot>> = BTreeMap::new();
    for h in hotspots {
        by_day.entry(h.date).or_default().push(h);
    }
    posts
        .iter()
        .map(|post| {
            let day = local_day(post.timestamp, cal);
            let candidates = by_day.get(&day)?;
            let mut best: Option<(&str, f64)> = None;
            for h in candidates {
                let d = crate::model::great_circle_km(post.location, h.location);
                best = match best {
                    None => Some((h.id.as_str(), d)),
                    Some((bid, bd)) => {
                        if d < bd || (d == bd && h.id.as_str() < bid) {
                            Some((h.id.as_str(), d))
                        } else {
                            Some((bid, bd))
                        }
                    }
                };
            }
            best.map(|(id, d)| (id.to_string(), d))
        })
        .collect()
}

/// Winding-number point-in-polygon test (boundary counts as inside).
/// Second algorithm to the even-odd ray cast used by region assignment.
pub fn winding_number_contains(vertices: &[GeoPoint], p: GeoPoint) -> bool {
    let (px, py) = (p.lon(), p.lat());
    let n = vertices.len();
    let mut winding = 0i32;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let (ax, ay) = (a.lon(), a.lat());
        let (bx, by) = (b.lon(), b.lat());
        let cross = (bx - ax) * (py - ay) - (px - ax) * (by - ay);
        // On-edge check: collinear and within the segment's extent.
        if cross.abs() <= 1e-12
            && px >= ax.min(bx)
            && px <= ax.max(bx)
            && py >= ay.min(by)
            && py <= ay.max(by)
        {
            return true;
        }
        if ay <= py {
            if by > py && cross > 0.0 {
                winding += 1;
            }
        } else if by <= py && cross < 0.0 {
            winding -= 1;
        }
    }
    winding != 0
}

/// Straightforward recursive evaluator for rule expressions, with its own
/// scan-based phrase containment. Reference for `ruledsl::matches`.
pub fn reference_matches(rule: &RuleExpr, text: &str) -> bool {
    fn split_tokens(text: &str) -> Vec<String> {
        let mut tokens = Vec::new();
        let mut current = String::new();
        for c in text.chars() {
            if c.is_alphanumeric() || c == '#' || c == '-' {
                for lc in c.to_lowercase() {
                    current.push(lc);
                }
            } else if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
        tokens
    }

    fn phrase_found(tokens: &[String], phrase: &[String]) -> bool {
        if phrase.is_empty() || phrase.len() > tokens.len() {
            return phrase.is_empty();
        }
        for start in 0..=(tokens.len() - phrase.len()) {
            let mut all = true;
            for (k, want) in phrase.iter().enumerate() {
                if &tokens[start + k] != want {
                    all = false;
                    break;
                }
            }
            if all {
                return true;
            }
        }
        false
    }

    fn eval(rule: &RuleExpr, tokens: &[String]) -> bool {
        match rule {
            RuleExpr::Phrase(phrase) => phrase_found(tokens, phrase),
            RuleExpr::And(children) => {
                for c in children {
                    if !eval(c, tokens) {
                        return false;
                    }
                }
                true
            }
            RuleExpr::Or(children) => {
                for c in children {
                    if eval(c, tokens) {
                        return true;
                    }
                }
                false
            }
        }
    }

    eval(rule, &split_tokens(text))
}

/// Textbook product-moment formula:
/// r = (n*Sxy - Sx*Sy) / sqrt((n*Sxx - Sx^2) * (n*Syy - Sy^2)).
/// Reference for `temporal::pearson`, which uses the mean-centered form.
pub fn pearson_textbook(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let syy: f64 = y.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}
