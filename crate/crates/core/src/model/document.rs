use serde::{Deserialize, Serialize};

/// Whitespace-delimited token count, the unit used for document length
/// statistics and gateway budget accounting.
pub fn count_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

/// One written section of the final document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub section_id: usize,
    pub title: String,
    pub body: String,
}

/// Assembled document plus the sections it was stitched from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthDocument {
    pub sections: Vec<Section>,
    pub text: String,
    pub token_count: usize,
}

impl SynthDocument {
    /// Stitches sections into the final document: every section contributes
    /// a `# {title}` heading followed by its body, separated by blank lines.
    pub fn assemble(sections: Vec<Section>) -> SynthDocument {
        let text = sections
            .iter()
            .map(|s| format!("# {}\n\n{}", s.title, s.body.trim()))
            .collect::<Vec<_>>()
            .join("\n\n");
        let token_count = count_tokens(&text);
        SynthDocument { sections, text, token_count }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_count_splits_on_whitespace() {
        assert_eq!(count_tokens(""), 0);
        assert_eq!(count_tokens("one  two\nthree"), 3);
    }

    #[test]
    fn assemble_emits_title_blocks_in_order() {
        let doc = SynthDocument::assemble(vec![
            Section { section_id: 1, title: "Overview".into(), body: "First part.\n".into() },
            Section { section_id: 2, title: "Details".into(), body: "Second part.".into() },
        ]);
        assert_eq!(doc.text, "# Overview\n\nFirst part.\n\n# Details\n\nSecond part.");
        assert_eq!(doc.token_count, 8);
    }
}
