//! Policy HTML to headed sections.
//!
//! Runs the html5ever tokenizer and cuts visible text into blocks at
//! block-level tag boundaries. Headings (`h1`-`h6`) become section titles;
//! everything else that carries text (`p`, `li`, leaf `div`s, loose text)
//! becomes a paragraph candidate.

use std::cell::RefCell;

use html5ever::tendril::StrTendril;
use html5ever::tokenizer::states::RawKind;
use html5ever::tokenizer::{
    BufferQueue, Tag, TagKind, Token, TokenSink, TokenSinkResult, Tokenizer, TokenizerOpts,
};
use thiserror::Error;

use super::{PolicyDocument, Section};
use crate::text::collapse_ws;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{0}: document has no visible text")]
    EmptyText(String),
}

/// Share of paragraph candidates that must follow a heading for a structured layout.
const STRUCTURED_SHARE: f64 = 0.8;

const SKIPPED: &[&str] = &[
    "script", "style", "nav", "noscript", "template", "head", "svg", "select", "iframe",
];

const BLOCKS: &[&str] = &[
    "p", "li", "div", "section", "article", "main", "header", "footer", "aside", "ul", "ol",
    "dl", "dt", "dd", "table", "thead", "tbody", "tfoot", "tr", "td", "th", "caption",
    "blockquote", "body", "html", "form", "fieldset", "figure", "figcaption", "pre", "address",
    "hr", "details", "summary",
];

fn heading_level(name: &str) -> bool {
    matches!(name, "h1" | "h2" | "h3" | "h4" | "h5" | "h6")
}

#[derive(Debug, PartialEq)]
enum Block {
    Heading(String),
    Paragraph(String),
}

#[derive(Default)]
struct State {
    skip: Vec<String>,
    in_heading: Option<String>,
    heading_buf: String,
    inline: String,
    blocks: Vec<Block>,
}

impl State {
    fn flush(&mut self) {
        let text = collapse_ws(&std::mem::take(&mut self.inline));
        if !text.is_empty() {
            self.blocks.push(Block::Paragraph(text));
        }
    }

    fn tag(&mut self, tag: Tag) -> TokenSinkResult<()> {
        let name: &str = &tag.name;
        if let Some(top) = self.skip.last() {
            if top == "head" && name == "body" && tag.kind == TagKind::StartTag {
                // unclosed <head>
                self.skip.pop();
            } else if name == top {
                match tag.kind {
                    TagKind::StartTag if !tag.self_closing => self.skip.push(name.to_string()),
                    TagKind::EndTag => {
                        self.skip.pop();
                    }
                    _ => {}
                }
            }
            return TokenSinkResult::Continue;
        }
        if tag.kind == TagKind::StartTag && SKIPPED.contains(&name) {
            if !tag.self_closing {
                self.skip.push(name.to_string());
            }
            return match name {
                "script" => TokenSinkResult::RawData(RawKind::ScriptData),
                "style" | "noscript" | "iframe" => TokenSinkResult::RawData(RawKind::Rawtext),
                _ => TokenSinkResult::Continue,
            };
        }
        if heading_level(name) {
            match tag.kind {
                TagKind::StartTag => {
                    self.flush();
                    self.in_heading = Some(name.to_string());
                    self.heading_buf.clear();
                }
                TagKind::EndTag => {
                    if self.in_heading.take().is_some() {
                        let text = collapse_ws(&std::mem::take(&mut self.heading_buf));
                        if !text.is_empty() {
                            self.blocks.push(Block::Heading(text));
                        }
                    }
                }
            }
            return TokenSinkResult::Continue;
        }
        if name == "br" {
            self.text(" ");
        } else if BLOCKS.contains(&name) && self.in_heading.is_none() {
            self.flush();
        }
        TokenSinkResult::Continue
    }

    fn text(&mut self, s: &str) {
        if !self.skip.is_empty() {
            return;
        }
        if self.in_heading.is_some() {
            self.heading_buf.push_str(s);
        } else {
            self.inline.push_str(s);
        }
    }
}

struct Sink(RefCell<State>);

impl TokenSink for Sink {
    type Handle = ();

    fn process_token(&self, token: Token, _line: u64) -> TokenSinkResult<()> {
        let mut st = self.0.borrow_mut();
        match token {
            Token::TagToken(tag) => st.tag(tag),
            Token::CharacterTokens(t) => {
                st.text(&t);
                TokenSinkResult::Continue
            }
            _ => TokenSinkResult::Continue,
        }
    }
}

fn tokenize(html: &str) -> Vec<Block> {
    let input = BufferQueue::default();
    input.push_back(StrTendril::from_slice(html));
    let tok = Tokenizer::new(Sink(RefCell::new(State::default())), TokenizerOpts::default());
    let _ = tok.feed(&input);
    tok.end();
    let mut st = tok.sink.0.borrow_mut();
    if st.in_heading.take().is_some() {
        let text = collapse_ws(&std::mem::take(&mut st.heading_buf));
        if !text.is_empty() {
            st.blocks.push(Block::Heading(text));
        }
    }
    st.flush();
    std::mem::take(&mut st.blocks)
}

/// Parse policy HTML. Invalid UTF-8 is replaced, not rejected.
pub fn parse_structure(raw_html: &[u8], source: &str) -> Result<PolicyDocument, ParseError> {
    let html = String::from_utf8_lossy(raw_html);
    let blocks = tokenize(&html);
    if blocks.is_empty() {
        return Err(ParseError::EmptyText(source.to_string()));
    }

    let headings = blocks.iter().filter(|b| matches!(b, Block::Heading(_))).count();
    let mut seen_heading = false;
    let (mut paras, mut after) = (0usize, 0usize);
    for b in &blocks {
        match b {
            Block::Heading(_) => seen_heading = true,
            Block::Paragraph(_) => {
                paras += 1;
                after += seen_heading as usize;
            }
        }
    }
    let structured =
        headings >= 2 && paras > 0 && after as f64 >= STRUCTURED_SHARE * paras as f64;

    let sections = if structured {
        let mut sections: Vec<Section> = Vec::new();
        let mut cur = Section {
            heading: String::new(),
            paragraphs: Vec::new(),
        };
        for b in blocks {
            match b {
                Block::Heading(h) => {
                    let done = std::mem::replace(
                        &mut cur,
                        Section {
                            heading: h,
                            paragraphs: Vec::new(),
                        },
                    );
                    if !done.paragraphs.is_empty() {
                        sections.push(done);
                    }
                }
                Block::Paragraph(p) => cur.paragraphs.push(p),
            }
        }
        if !cur.paragraphs.is_empty() {
            sections.push(cur);
        }
        sections
    } else {
        let mut paragraphs: Vec<String> = blocks
            .iter()
            .filter_map(|b| match b {
                Block::Paragraph(p) => Some(p.clone()),
                Block::Heading(_) => None,
            })
            .collect();
        if paragraphs.is_empty() {
            // headings only: keep their text rather than dropping everything
            paragraphs = blocks
                .into_iter()
                .map(|b| match b {
                    Block::Heading(t) | Block::Paragraph(t) => t,
                })
                .collect();
        }
        vec![Section {
            heading: String::new(),
            paragraphs,
        }]
    };

    Ok(PolicyDocument {
        source: source.to_string(),
        raw_html: raw_html.to_vec(),
        sections,
        structured,
    })
}

/// Plain-text policies: blank-line separated paragraphs, never structured.
pub fn parse_plain_text(raw: &[u8], source: &str) -> Result<PolicyDocument, ParseError> {
    let text = String::from_utf8_lossy(raw).replace("\r\n", "\n");
    let paragraphs: Vec<String> = text
        .split("\n\n")
        .map(collapse_ws)
        .filter(|p| !p.is_empty())
        .collect();
    if paragraphs.is_empty() {
        return Err(ParseError::EmptyText(source.to_string()));
    }
    Ok(PolicyDocument {
        source: source.to_string(),
        raw_html: raw.to_vec(),
        sections: vec![Section {
            heading: String::new(),
            paragraphs,
        }],
        structured: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(html: &str) -> PolicyDocument {
        parse_structure(html.as_bytes(), "test.html").unwrap()
    }

    #[test]
    fn headed_sections() {
        let d = parse("<h2>Data We Collect</h2><p>A.</p><p>B.</p><h2>Sharing</h2><p>C.</p>");
        assert!(d.structured);
        assert_eq!(d.sections.len(), 2);
        assert_eq!(d.sections[0].heading, "Data We Collect");
        assert_eq!(d.sections[0].paragraphs, ["A.", "B."]);
        assert_eq!(d.sections[1].paragraphs, ["C."]);
    }

    #[test]
    fn plain_paragraph_is_unstructured() {
        let d = parse("<p>only text</p>");
        assert!(!d.structured);
        assert_eq!(d.sections.len(), 1);
        assert_eq!(d.sections[0].heading, "");
        assert_eq!(d.sections[0].paragraphs, ["only text"]);
    }

    #[test]
    fn scripts_styles_and_nav_are_removed() {
        let d = parse(
            "<html><head><title>T</title><style>p{color:red}</style></head><body>\
             <nav><a href='/'>Home</a> <ul><li>Menu</li></ul></nav>\
             <script>var x = '<p>hidden</p>';</script>\
             <p>Visible &amp; kept.</p></body></html>",
        );
        let all: Vec<&String> = d.sections.iter().flat_map(|s| &s.paragraphs).collect();
        assert_eq!(all, ["Visible & kept."]);
    }

    #[test]
    fn lists_and_leaf_divs_are_paragraphs() {
        let d = parse(
            "<h1>Policy</h1><h2>What We Collect</h2><ul><li>Your  name</li><li>Your email</li></ul>\
             <div><div>Leaf div text</div></div><h2>Other</h2><p>x <b>bold</b> y</p>",
        );
        assert!(d.structured);
        assert_eq!(d.sections[0].heading, "What We Collect");
        assert_eq!(d.sections[0].paragraphs, ["Your name", "Your email", "Leaf div text"]);
        assert_eq!(d.sections[1].paragraphs, ["x bold y"]);
    }

    #[test]
    fn mostly_unheaded_text_is_unstructured() {
        let d = parse("<p>a</p><p>b</p><p>c</p><h2>H1</h2><p>d</p><h2>H2</h2><p>e</p>");
        // 2 of 5 candidates follow a heading
        assert!(!d.structured);
        assert_eq!(d.sections[0].paragraphs, ["a", "b", "c", "d", "e"]);
    }

    #[test]
    fn empty_document_is_an_error() {
        assert!(parse_structure(b"<html><script>x</script></html>", "e").is_err());
        assert!(parse_structure(b"", "e").is_err());
        assert!(parse_plain_text(b"\n\n  \n", "e").is_err());
    }

    #[test]
    fn plain_text_paragraphs() {
        let d = parse_plain_text(b"We collect data.\nMore.\n\nSecond para.", "p.txt").unwrap();
        assert_eq!(d.sections[0].paragraphs, ["We collect data. More.", "Second para."]);
    }
}
