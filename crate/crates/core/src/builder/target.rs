use crate::{Error, Result};

/// Delimiter between the slot value and its explanation in a target string.
pub const TARGET_SEPARATOR: &str = " | ";

pub fn render_target(value: &str, explanation: &str) -> String {
    if explanation.is_empty() {
        value.to_string()
    } else {
        format!("{value}{TARGET_SEPARATOR}{explanation}")
    }
}

/// Splits a generation at the first separator. A value-only generation yields
/// an empty explanation.
pub fn parse_generation(text: &str) -> Result<(String, String)> {
    if text.trim().is_empty() {
        return Err(Error::EmptyGeneration);
    }
    Ok(match text.split_once(TARGET_SEPARATOR) {
        Some((value, explanation)) => (value.trim().to_string(), explanation.trim().to_string()),
        None => (text.trim().to_string(), String::new()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn value_only() {
        assert_eq!(render_target("5-star", ""), "5-star");
        assert_eq!(parse_generation("5-star").unwrap(), ("5-star".into(), String::new()));
        assert_eq!(
            parse_generation("  5-star \n").unwrap(),
            ("5-star".into(), String::new())
        );
    }

    #[test]
    fn value_and_explanation() {
        let t = render_target("5-star", "system: ... user: ...");
        assert_eq!(t, "5-star | system: ... user: ...");
        assert_eq!(
            parse_generation(&t).unwrap(),
            ("5-star".into(), "system: ... user: ...".into())
        );
    }

    /// Scan oracle: walk the bytes and stop at the first " | ".
    fn first_separator(text: &str) -> Option<usize> {
        let b = text.as_bytes();
        (0..b.len().saturating_sub(2)).find(|&i| &b[i..i + 3] == b" | ")
    }

    #[test]
    fn first_occurrence_wins() {
        let text = "a | b | c";
        let at = first_separator(text).unwrap();
        assert_eq!(at, 1);
        assert_eq!(parse_generation(text).unwrap(), ("a".into(), "b | c".into()));
    }

    #[test]
    fn whitespace_only_is_error() {
        assert!(matches!(parse_generation(" \t\n"), Err(Error::EmptyGeneration)));
        assert!(matches!(parse_generation(""), Err(Error::EmptyGeneration)));
    }

    proptest! {
        #[test]
        fn split_matches_scan_oracle(text in "[a| ]{1,12}") {
            prop_assume!(!text.trim().is_empty());
            let (v, e) = parse_generation(&text).unwrap();
            match first_separator(&text) {
                Some(i) => {
                    prop_assert_eq!(v, text[..i].trim());
                    prop_assert_eq!(e, text[i + 3..].trim());
                }
                None => {
                    prop_assert_eq!(v, text.trim());
                    prop_assert_eq!(e, "");
                }
            }
        }
    }
}
