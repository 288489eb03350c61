//! Tolerant extraction of a structured document from raw model output.
//!
//! Models wrap their JSON in code fences, prose preambles and trailers.
//! The extractor ignores all of that: it scans for the first balanced
//! top-level object (string- and escape-aware) and parses exactly that
//! slice. Anything without a parseable balanced object is `MALFORMED`.

/// Locate and parse the first balanced top-level JSON object in `raw`.
///
/// Returns the parse-failure detail on error; the caller wraps it in a
/// [`super::FailureCode::Malformed`] outcome.
pub fn extract_structured(raw: &str) -> Result<serde_json::Value, String> {
    let text = raw.trim();
    if text.is_empty() {
        return Err("empty response".into());
    }

    let slice = first_balanced_object(text)
        .ok_or_else(|| preview("no balanced JSON object found", text))?;
    serde_json::from_str(slice).map_err(|e| format!("object does not parse: {e}"))
}

/// The byte range of the first `{ ... }` with balanced braces outside
/// string literals, or `None` (covers truncated output).
fn first_balanced_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;

    for (offset, &b) in bytes[start..].iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + offset + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

fn preview(message: &str, text: &str) -> String {
    let head: String = text.chars().take(80).collect();
    format!("{message} (response starts with {head:?})")
}
