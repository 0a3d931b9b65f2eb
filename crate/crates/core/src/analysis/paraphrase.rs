//! Template and synonym rewriting for the builtin engine.

use super::intent::{mask_quotes, Grammar};

const TEMPLATES: &[&str] = &[
    "please {}",
    "could you {}?",
    "can you {} for me",
    "i would like you to {}",
    "{}, thanks",
    "kindly {}",
    "would you {}?",
    "{}",
];

fn strip_end(s: &str) -> &str {
    s.trim().trim_end_matches(['.', '!', '?']).trim_end()
}

fn lower_first(s: &str) -> String {
    if s.starts_with("I ") || s.starts_with("I'") {
        return s.to_string();
    }
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_lowercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Returns `n` distinct rewordings of `prompt`, none equal to it.
///
/// The first grammar phrase found in the prompt is swapped for members of
/// its synonym group; each body is then wrapped in politeness templates.
/// Prompts with no known phrase get template-only variants.
pub fn builtin_paraphrases(grammar: &Grammar, prompt: &str, n: usize) -> Vec<String> {
    let base = strip_end(prompt);
    let mut bodies = vec![base.to_string()];
    let intent = grammar.parse(base);
    if let Some(phrase) = intent.first().matched.as_deref() {
        if let Some(group) = grammar.synonym_group(phrase) {
            let masked = mask_quotes(base);
            let re = regex::Regex::new(&format!(
                r"\b{}\b",
                phrase
                    .split_whitespace()
                    .map(regex::escape)
                    .collect::<Vec<_>>()
                    .join(r"\s+")
            ))
            .expect("phrase regex");
            if let Some(m) = re.find(&masked) {
                for alt in group.iter().filter(|a| a.as_str() != phrase) {
                    bodies.push(format!("{}{}{}", &base[..m.start()], alt, &base[m.end()..]));
                }
            }
        }
    }

    let mut out: Vec<String> = Vec::with_capacity(n);
    let total = bodies.len() * TEMPLATES.len();
    let mut i = 0;
    while out.len() < n && i < total {
        // cycle bodies fastest so early variants differ in wording
        let body = &bodies[i % bodies.len()];
        let template = TEMPLATES[(i / bodies.len()) % TEMPLATES.len()];
        let candidate = template.replacen("{}", &lower_first(body), 1);
        if candidate != prompt && !out.contains(&candidate) {
            out.push(candidate);
        }
        i += 1;
    }
    let mut k = 2;
    while out.len() < n {
        let candidate = format!("{base} (request {k})");
        if !out.contains(&candidate) {
            out.push(candidate);
        }
        k += 1;
    }
    out
}
