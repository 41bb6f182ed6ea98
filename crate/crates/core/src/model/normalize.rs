/// Token every missing or unknowable value normalizes to.
///
/// The token is itself a fixed point of [`normalize_cell`], so predictions
/// that literally say "null" compare equal to missing ground-truth cells.
pub const NULL_TOKEN: &str = "null";

const NULL_SYNONYMS: [&str; 6] = ["", "null", "n/a", "none", "-", "nan"];

/// Canonicalizes a raw cell value before comparison.
///
/// Pipeline: case fold, whitespace collapse, missing-value synonym mapping,
/// thousands-separator stripping on numeric strings, then punctuation
/// removal that preserves decimal points and date separators between digits
/// and the sign of a leading negative number. The function is idempotent:
/// `normalize_cell(normalize_cell(x)) == normalize_cell(x)` for any input.
pub fn normalize_cell(raw: &str) -> String {
    let folded = raw.to_lowercase();
    let collapsed = collapse_whitespace(&folded);
    if NULL_SYNONYMS.contains(&collapsed.as_str()) {
        return NULL_TOKEN.to_string();
    }
    let unseparated = strip_thousands_separators(&collapsed);
    let stripped = strip_punctuation(&unseparated);
    // Punctuation removal can leave stray spaces or reduce the string to a
    // missing-value synonym, so both passes run again.
    let out = collapse_whitespace(&stripped);
    if NULL_SYNONYMS.contains(&out.as_str()) {
        NULL_TOKEN.to_string()
    } else {
        out
    }
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Removes commas from tokens shaped like grouped numbers ("3,480,000",
/// "-1,234.5"). Other tokens pass through untouched.
fn strip_thousands_separators(s: &str) -> String {
    s.split(' ')
        .map(|tok| {
            if is_grouped_number(tok) {
                tok.chars().filter(|&c| c != ',').collect()
            } else {
                tok.to_string()
            }
        })
        .collect::<Vec<String>>()
        .join(" ")
}

fn is_grouped_number(tok: &str) -> bool {
    let tok = tok.strip_prefix(['+', '-']).unwrap_or(tok);
    let mantissa = match tok.split_once('.') {
        Some((head, frac)) => {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return false;
            }
            head
        }
        None => tok,
    };
    let mut groups = mantissa.split(',');
    let first = match groups.next() {
        Some(g) => g,
        None => return false,
    };
    if first.is_empty() || first.len() > 3 || !first.bytes().all(|b| b.is_ascii_digit()) {
        return false;
    }
    let mut any_group = false;
    for g in groups {
        if g.len() != 3 || !g.bytes().all(|b| b.is_ascii_digit()) {
            return false;
        }
        any_group = true;
    }
    any_group
}

/// Drops punctuation except: `.`, `-`, `/` flanked by ASCII digits (decimal
/// points, date separators, numeric ranges) and a `-` at position zero that
/// is immediately followed by a digit (negative number sign).
fn strip_punctuation(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    for (idx, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() || c == ' ' {
            out.push(c);
            continue;
        }
        let prev_digit = idx > 0 && chars[idx - 1].is_ascii_digit();
        let next_digit = idx + 1 < chars.len() && chars[idx + 1].is_ascii_digit();
        let keep = match c {
            '.' | '/' => prev_digit && next_digit,
            '-' => (prev_digit && next_digit) || (idx == 0 && next_digit),
            _ => false,
        };
        if keep {
            out.push(c);
        }
    }
    out
}
