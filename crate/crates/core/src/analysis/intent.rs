//! Keyword intent grammar used by the builtin dialogue engine.
//!
//! Matching is on the ASCII-lowercased description with quoted spans
//! masked out. Rules are tried in a fixed order and the first hit wins.

use std::collections::BTreeMap;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::task::TaskKind;
use crate::context::ReferenceExpr;
use crate::types::{Modality, ResourceId};

pub type Params = BTreeMap<String, serde_json::Value>;

pub const MAX_CHAIN_STAGES: usize = 4;

const BUILTIN_SYNONYMS: &str = include_str!("../../data/synonyms.json");

/// Keyword rules in match order.
const RULES: &[(TaskKind, &[&str])] = &[
    (
        TaskKind::SpeechRecognition,
        &["transcribe", "transcription", "speech to text"],
    ),
    (TaskKind::SpeechTranslation, &["translate", "translation"]),
    (
        TaskKind::TextToSpeech,
        &["say", "read aloud", "text to speech", "generate speech", "synthesize speech"],
    ),
    (TaskKind::TextToAudio, &["sound of", "audio of", "generate audio"]),
    (
        TaskKind::SpeechEnhancement,
        &["enhance", "enhancement", "denoise", "clean"],
    ),
    (TaskKind::SpeechSeparation, &["separate", "separation"]),
    (TaskKind::MonoToBinaural, &["binaural"]),
    (TaskKind::AudioInpainting, &["inpaint", "inpainting"]),
    (TaskKind::SoundExtraction, &["extract", "extraction"]),
    (TaskKind::SoundDetection, &["detect", "detection", "events"]),
    (
        TaskKind::TalkingHeadSynthesis,
        &["talking head", "portrait video"],
    ),
    (TaskKind::AudioToText, &["audio to text", "audio-to-text"]),
    (TaskKind::AudioCaption, &["caption", "describe the audio"]),
    (TaskKind::StyleTransfer, &["style"]),
    (TaskKind::SingingSynthesis, &["sing", "singing"]),
    (TaskKind::ImageToAudio, &["image to audio", "image-to-audio"]),
];

const GENERATIVE_VERBS: &str = r"\b(generate|create|make|compose|produce|write|synthesi[sz]e|render|draw|paint|build|design|convert)\b";

/// What the grammar understood from one chain stage.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IntentSketch {
    pub task: Option<TaskKind>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub refs: Vec<ReferenceExpr>,
    /// A creation verb was present; separates "make me a PDF" from small talk.
    #[serde(default)]
    pub generative: bool,
    /// The phrase that fired the rule, as written (lowercased).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched: Option<String>,
}

impl IntentSketch {
    pub fn output_modality(&self) -> Option<Modality> {
        self.task.map(TaskKind::output_modality)
    }
}

/// A description split on "then" into chain stages.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParsedIntent {
    pub stages: Vec<IntentSketch>,
    /// Original text of each stage.
    pub segments: Vec<String>,
}

impl ParsedIntent {
    pub fn first(&self) -> &IntentSketch {
        &self.stages[0]
    }

    pub fn is_chain(&self) -> bool {
        self.stages.len() > 1
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GrammarError {
    #[error("cannot read synonym table {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed synonym table: {0}")]
    Parse(#[from] serde_json::Error),
}

struct Rule {
    task: TaskKind,
    /// (phrase, compiled) pairs, keywords first then synonyms.
    phrases: Vec<(String, Regex)>,
}

pub struct Grammar {
    rules: Vec<Rule>,
    /// Every synonym group: a keyword plus its alternatives.
    groups: Vec<Vec<String>>,
    generative: Regex,
    then_split: Regex,
    turn_ref: Regex,
    upload_ref: Regex,
    id_ref: Regex,
    pronoun_ref: Regex,
    media_ref: Regex,
    mask: Regex,
    language: Regex,
    media_word: Regex,
    no_text: Regex,
}

impl std::fmt::Debug for Grammar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grammar")
            .field("rules", &self.rules.len())
            .field("groups", &self.groups.len())
            .finish()
    }
}

fn phrase_regex(phrase: &str) -> Regex {
    let body = phrase
        .split_whitespace()
        .map(regex::escape)
        .collect::<Vec<_>>()
        .join(r"\s+");
    Regex::new(&format!(r"\b{body}\b")).expect("phrase regex")
}

impl Grammar {
    pub fn builtin() -> Self {
        Self::from_synonyms_json(BUILTIN_SYNONYMS).expect("shipped synonym table parses")
    }

    pub fn from_synonyms_file(path: &Path) -> Result<Self, GrammarError> {
        let raw = std::fs::read_to_string(path).map_err(|source| GrammarError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_synonyms_json(&raw)
    }

    pub fn from_synonyms_json(raw: &str) -> Result<Self, GrammarError> {
        let table: BTreeMap<String, Vec<String>> = serde_json::from_str(raw)?;
        let mut groups: Vec<Vec<String>> = Vec::new();
        let rules = RULES
            .iter()
            .map(|(task, keywords)| {
                let mut phrases: Vec<String> = keywords.iter().map(|s| s.to_string()).collect();
                for (key, alts) in &table {
                    if keywords.contains(&key.as_str()) {
                        let mut group = vec![key.to_ascii_lowercase()];
                        for a in alts {
                            let a = a.to_ascii_lowercase();
                            if !phrases.contains(&a) {
                                phrases.push(a.clone());
                            }
                            group.push(a);
                        }
                        groups.push(group);
                    }
                }
                Rule {
                    task: *task,
                    phrases: phrases
                        .into_iter()
                        .map(|p| {
                            let re = phrase_regex(&p);
                            (p, re)
                        })
                        .collect(),
                }
            })
            .collect();
        let re = |s: &str| Regex::new(s).expect("grammar regex");
        Ok(Grammar {
            rules,
            groups,
            generative: re(GENERATIVE_VERBS),
            then_split: re(r"(?:,\s*)?(?:\band\s+)?\bthen\b"),
            turn_ref: re(r"\bturn\s*#?\s*(\d+)\b"),
            upload_ref: re(r"\b(first|second|third|fourth)\s+(?:uploaded|upload)\b"),
            id_ref: re(r"\b(?:id|resource)\s+([0-9a-f]{24}(?:-\d+)?)\b"),
            pronoun_ref: re(r"\b(it|this|that|these|them|last|latest|previous|above)\b"),
            media_ref: re(
                r"\bthe\s+(?:[a-z-]+\s+)?(audio|speech|recording|clip|sound|song|file|image|picture|photo|score|video|voice|track|result|output|text|transcript)\b",
            ),
            mask: re(
                r"\bfrom\s+(\d+(?:\.\d+)?)\s*(?:s|sec|secs|seconds?)?\s+to\s+(\d+(?:\.\d+)?)\s*(?:s|sec|secs|seconds?)\b",
            ),
            language: re(r"\b(?:to|into|in)\s+(french|german|spanish|english)\b"),
            media_word: re(r"\b(audio|sound)\b"),
            no_text: re(
                r"^(it|this|that|them|the\s+(text|transcript|transcription|result|output))\b",
            ),
        })
    }

    /// Synonym group containing `phrase`, if any.
    pub fn synonym_group(&self, phrase: &str) -> Option<&[String]> {
        self.groups
            .iter()
            .find(|g| g.iter().any(|p| p == phrase))
            .map(Vec::as_slice)
    }

    pub fn parse(&self, description: &str) -> ParsedIntent {
        self.parse_with(description, &[])
    }

    /// Like [`Grammar::parse`], also told which modalities are attached so the
    /// image rule can fire.
    pub fn parse_with(&self, description: &str, attached: &[Modality]) -> ParsedIntent {
        let masked = mask_quotes(description);
        let mut cuts = Vec::new();
        for m in self.then_split.find_iter(&masked) {
            cuts.push((m.start(), m.end()));
        }
        let mut segments = Vec::new();
        let mut start = 0;
        for (s, e) in cuts {
            segments.push(description[start..s].trim().to_string());
            start = e;
        }
        segments.push(description[start..].trim().to_string());
        segments.retain(|s| !s.is_empty());
        if segments.is_empty() {
            segments.push(String::new());
        }
        let stages = segments
            .iter()
            .enumerate()
            .map(|(i, seg)| self.parse_segment(seg, if i == 0 { attached } else { &[] }))
            .collect();
        ParsedIntent { stages, segments }
    }

    fn parse_segment(&self, original: &str, attached: &[Modality]) -> IntentSketch {
        let masked = mask_quotes(original);
        let quoted = quoted_spans(original)
            .first()
            .map(|&(s, e)| original[s..e].to_string());

        let mut hit: Option<(TaskKind, String, usize)> = None;
        'rules: for rule in &self.rules {
            for (phrase, re) in &rule.phrases {
                if let Some(m) = re.find(&masked) {
                    hit = Some((rule.task, phrase.clone(), m.end()));
                    break 'rules;
                }
            }
        }
        if hit.is_none()
            && attached.contains(&Modality::Image)
            && self.media_word.is_match(&masked)
        {
            hit = Some((TaskKind::ImageToAudio, "audio".to_string(), masked.len()));
        }

        let mut params = Params::new();
        let task = hit.as_ref().map(|h| h.0);
        if let Some((task, _, end)) = &hit {
            match task {
                TaskKind::TextToSpeech => {
                    if let Some(text) = quoted.clone().or_else(|| self.trailing_text(original, *end)) {
                        params.insert("text".into(), text.into());
                    }
                }
                TaskKind::TextToAudio => {
                    let d = quoted
                        .clone()
                        .or_else(|| self.trailing_text(original, *end))
                        .unwrap_or_else(|| original.trim().to_string());
                    params.insert("description".into(), d.into());
                }
                TaskKind::AudioInpainting => {
                    if let Some(c) = self.mask.captures(&masked) {
                        let t0: f64 = c[1].parse().unwrap_or(0.0);
                        let t1: f64 = c[2].parse().unwrap_or(0.0);
                        params.insert("mask".into(), serde_json::json!([t0, t1]));
                    }
                }
                TaskKind::SpeechTranslation => {
                    let lang = self
                        .language
                        .captures(&masked)
                        .map(|c| match &c[1] {
                            "german" => "de",
                            "spanish" => "es",
                            "english" => "en",
                            _ => "fr",
                        })
                        .unwrap_or("fr");
                    params.insert("target".into(), lang.into());
                }
                _ => {}
            }
        }

        IntentSketch {
            task,
            refs: self.refs(&masked),
            generative: self.generative.is_match(&masked),
            matched: hit.map(|h| h.1),
            params,
        }
    }

    fn trailing_text(&self, original: &str, end: usize) -> Option<String> {
        let rest = original.get(end..)?;
        let t = rest
            .trim()
            .trim_start_matches([':', ',', '-'])
            .trim();
        let t = t
            .strip_prefix("saying ")
            .or_else(|| t.strip_prefix("that says "))
            .unwrap_or(t)
            .trim()
            .trim_end_matches(['.', '!', '?'])
            .trim();
        if t.is_empty() || self.no_text.is_match(&t.to_ascii_lowercase()) {
            None
        } else {
            Some(t.to_string())
        }
    }

    fn refs(&self, masked: &str) -> Vec<ReferenceExpr> {
        let mut found: Vec<(usize, ReferenceExpr)> = Vec::new();
        for c in self.turn_ref.captures_iter(masked) {
            if let Ok(k) = c[1].parse::<usize>() {
                if k >= 1 {
                    found.push((c.get(0).unwrap().start(), ReferenceExpr::FromTurn(k)));
                }
            }
        }
        for c in self.upload_ref.captures_iter(masked) {
            let p = match &c[1] {
                "first" => 0,
                "second" => 1,
                "third" => 2,
                _ => 3,
            };
            found.push((c.get(0).unwrap().start(), ReferenceExpr::Uploaded(p)));
        }
        for c in self.id_ref.captures_iter(masked) {
            found.push((
                c.get(0).unwrap().start(),
                ReferenceExpr::Explicit(ResourceId(c[1].to_string())),
            ));
        }
        found.sort_by_key(|(at, _)| *at);
        let mut refs: Vec<ReferenceExpr> = found.into_iter().map(|(_, r)| r).collect();
        if refs.is_empty() && (self.pronoun_ref.is_match(masked) || self.media_ref.is_match(masked)) {
            refs.push(ReferenceExpr::Latest);
        }
        refs
    }
}

/// Parses with the builtin grammar.
pub fn parse_intent(description: &str) -> ParsedIntent {
    builtin_grammar().parse(description)
}

pub fn builtin_grammar() -> &'static Grammar {
    static G: std::sync::OnceLock<Grammar> = std::sync::OnceLock::new();
    G.get_or_init(Grammar::builtin)
}

fn is_open_quote(c: char) -> bool {
    matches!(c, '"' | '\'' | '\u{201c}' | '\u{2018}')
}

fn is_close_quote(c: char) -> bool {
    matches!(c, '"' | '\'' | '\u{201d}' | '\u{2019}')
}

/// Byte spans of quoted text (contents only). An opening quote must follow
/// start-of-text, whitespace, '(' or ':'; a closing quote must precede
/// end-of-text, whitespace or punctuation. Apostrophes inside words are
/// therefore not taken as quotes.
pub fn quoted_spans(s: &str) -> Vec<(usize, usize)> {
    let chars: Vec<(usize, char)> = s.char_indices().collect();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (at, c) = chars[i];
        let opens = is_open_quote(c)
            && (i == 0 || {
                let p = chars[i - 1].1;
                p.is_whitespace() || p == '(' || p == ':'
            });
        if opens {
            let mut j = i + 1;
            let mut closed = None;
            while j < chars.len() {
                let (_, d) = chars[j];
                let boundary = j + 1 == chars.len() || {
                    let n = chars[j + 1].1;
                    n.is_whitespace() || ".,!?;:)".contains(n)
                };
                if is_close_quote(d) && boundary && j > i + 1 {
                    closed = Some(j);
                    break;
                }
                j += 1;
            }
            if let Some(j) = closed {
                spans.push((at + c.len_utf8(), chars[j].0));
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    spans
}

/// ASCII-lowercased copy with quoted spans (and their quote marks) blanked.
/// Byte offsets match the input.
pub fn mask_quotes(s: &str) -> String {
    let mut bytes = s.to_ascii_lowercase().into_bytes();
    for (start, end) in quoted_spans(s) {
        let open = s[..start].chars().next_back().map_or(0, char::len_utf8);
        let close = s[end..].chars().next().map_or(0, char::len_utf8);
        for b in &mut bytes[start - open..end + close] {
            *b = b' ';
        }
    }
    String::from_utf8(bytes).expect("blanking with ASCII keeps UTF-8 valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(s: &str) -> Option<TaskKind> {
        parse_intent(s).first().task
    }

    #[test]
    fn transcribe_last_audio() {
        let p = parse_intent("transcribe the last audio");
        assert_eq!(p.stages.len(), 1);
        assert_eq!(p.first().task, Some(TaskKind::SpeechRecognition));
        assert_eq!(p.first().refs, vec![ReferenceExpr::Latest]);
    }

    #[test]
    fn say_then_transcribe_chain() {
        let p = parse_intent("say 'hello' then transcribe it");
        assert_eq!(p.stages.len(), 2);
        assert_eq!(p.stages[0].task, Some(TaskKind::TextToSpeech));
        assert_eq!(p.stages[0].params["text"], "hello");
        assert!(p.stages[0].refs.is_empty());
        assert_eq!(p.stages[1].task, Some(TaskKind::SpeechRecognition));
        assert_eq!(p.stages[1].refs, vec![ReferenceExpr::Latest]);
    }

    #[test]
    fn no_rule_fires() {
        let p = parse_intent("compose a symphony orchestra score");
        assert_eq!(p.first().task, None);
        assert!(p.first().generative);
        let p = parse_intent("how are you?");
        assert_eq!(p.first().task, None);
        assert!(!p.first().generative);
    }

    #[test]
    fn then_inside_quotes_does_not_split() {
        let p = parse_intent("say 'now and then' please");
        assert_eq!(p.stages.len(), 1);
        assert_eq!(p.first().params["text"], "now and then");
    }

    #[test]
    fn rule_order_is_first_match() {
        // "say" precedes "detect"
        assert_eq!(task("say 'detect'"), Some(TaskKind::TextToSpeech));
        assert_eq!(task("detect events in it"), Some(TaskKind::SoundDetection));
        assert_eq!(
            task("make the enhanced audio binaural"),
            Some(TaskKind::MonoToBinaural)
        );
        assert_eq!(task("caption this clip"), Some(TaskKind::AudioCaption));
        assert_eq!(task("audio to text please"), Some(TaskKind::AudioToText));
        assert_eq!(task("transfer the style"), Some(TaskKind::StyleTransfer));
        assert_eq!(task("sing this score"), Some(TaskKind::SingingSynthesis));
        assert_eq!(task("using a single word"), None);
    }

    #[test]
    fn tts_trailing_text_and_pronouns() {
        let p = parse_intent("Say Hello World!");
        assert_eq!(p.first().params["text"], "Hello World");
        let p = parse_intent("say it");
        assert!(!p.first().params.contains_key("text"));
        assert_eq!(p.first().refs, vec![ReferenceExpr::Latest]);
        let p = parse_intent("read aloud the transcript");
        assert!(!p.first().params.contains_key("text"));
    }

    #[test]
    fn references() {
        let p = parse_intent("transcribe the audio from turn 12");
        assert_eq!(p.first().refs, vec![ReferenceExpr::FromTurn(12)]);
        let p = parse_intent("transfer the style of the second uploaded file onto the first uploaded one");
        assert_eq!(
            p.first().refs,
            vec![ReferenceExpr::Uploaded(1), ReferenceExpr::Uploaded(0)]
        );
        let id = "0123456789abcdef00000010";
        let p = parse_intent(&format!("transcribe resource {id}"));
        assert_eq!(p.first().refs, vec![ReferenceExpr::Explicit(ResourceId(id.into()))]);
        assert!(parse_intent("detect dolphins' dreams").first().refs.is_empty());
    }

    #[test]
    fn inpaint_mask_and_translation_target() {
        let p = parse_intent("inpaint the audio from turn 3 from 0.5 s to 1.25 s");
        assert_eq!(p.first().params["mask"], serde_json::json!([0.5, 1.25]));
        assert_eq!(p.first().refs, vec![ReferenceExpr::FromTurn(3)]);
        let p = parse_intent("inpaint it from 5 s to 2 s");
        assert_eq!(p.first().params["mask"], serde_json::json!([5.0, 2.0]));
        let p = parse_intent("translate this into german");
        assert_eq!(p.first().params["target"], "de");
    }

    #[test]
    fn image_rule_needs_attachment() {
        let g = builtin_grammar();
        assert_eq!(g.parse("what would this sound like").first().task, None);
        assert_eq!(
            g.parse_with("what would this sound like", &[Modality::Image]).first().task,
            Some(TaskKind::ImageToAudio)
        );
    }

    #[test]
    fn synonyms_extend_rules() {
        assert_eq!(task("write down this recording"), Some(TaskKind::SpeechRecognition));
        assert_eq!(task("please demix this"), Some(TaskKind::SpeechSeparation));
        let g = builtin_grammar();
        let group = g.synonym_group("write down").unwrap();
        assert_eq!(group[0], "transcribe");
    }

    #[test]
    fn quote_scanner() {
        assert_eq!(quoted_spans("say 'hi'"), vec![(5, 7)]);
        assert!(quoted_spans("dolphins' dreams").is_empty());
        assert!(quoted_spans("I'd like it").is_empty());
        let s = "say \u{201c}caf\u{e9}\u{201d} now";
        let spans = quoted_spans(s);
        assert_eq!(&s[spans[0].0..spans[0].1], "caf\u{e9}");
        assert_eq!(mask_quotes(s).len(), s.len());
    }

    #[test]
    fn chain_of_five_parses_five_stages() {
        let p = parse_intent("say 'a' then transcribe it then say it then transcribe it then say it");
        assert_eq!(p.stages.len(), 5);
    }
}
