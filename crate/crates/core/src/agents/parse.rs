use regex::Regex;

use crate::error::AgentError;

use super::prompt::OptionPosition;

fn failure(reply: &str, reason: &str) -> AgentError {
    AgentError::ParseFailure {
        reply: reply.to_string(),
        reason: reason.to_string(),
    }
}

/// First case-insensitive `option <label>` in the reply, or a bare label as
/// the whole reply (markup and punctuation ignored).
pub fn parse_choice(text: &str, labels: &[String; 2]) -> Result<OptionPosition, AgentError> {
    let alt = labels
        .iter()
        .map(|l| regex::escape(l))
        .collect::<Vec<_>>()
        .join("|");
    let re = Regex::new(&format!(r"(?i)\boption\s*[:\-]?\s*({alt})\b"))
        .expect("escaped labels form a valid regex");
    let pick = |s: &str| {
        if s.eq_ignore_ascii_case(&labels[0]) {
            Some(OptionPosition::A)
        } else if s.eq_ignore_ascii_case(&labels[1]) {
            Some(OptionPosition::B)
        } else {
            None
        }
    };
    if let Some(c) = re.captures(text) {
        if let Some(p) = pick(&c[1]) {
            return Ok(p);
        }
    }
    let bare: String = text.chars().filter(|c| c.is_alphanumeric()).collect();
    pick(&bare).ok_or_else(|| failure(text, "no option label found"))
}

/// First whole-number token in 0-100. Signed and fractional tokens are
/// skipped.
pub fn parse_rating(text: &str) -> Result<u8, AgentError> {
    let re = Regex::new(r"-?\d+(?:\.\d+)?").expect("static regex");
    for m in re.find_iter(text) {
        let tok = m.as_str();
        if tok.starts_with('-') || tok.contains('.') {
            continue;
        }
        if let Ok(v) = tok.parse::<u32>() {
            if v <= 100 {
                return Ok(v as u8);
            }
        }
    }
    Err(failure(text, "no integer between 0 and 100"))
}
