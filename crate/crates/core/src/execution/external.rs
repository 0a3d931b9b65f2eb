//! Executors that run outside the process: a command line with file
//! placeholders, or an HTTP endpoint taking multipart uploads.

use std::path::Path;
use std::process::Command;
use std::time::Duration;

use base64::Engine as _;
use serde::Deserialize;

use super::{EventRecord, RawOutput};
use crate::analysis::Params;
use crate::types::{ErrorReport, Modality};

const HEALTH_TIMEOUT: Duration = Duration::from_secs(2);
const CALL_TIMEOUT: Duration = Duration::from_secs(120);
const STDERR_EXCERPT: usize = 400;

fn excerpt(s: &str) -> String {
    let s = s.trim();
    if s.len() <= STDERR_EXCERPT {
        return s.to_string();
    }
    let mut end = STDERR_EXCERPT;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}…", &s[..end])
}

fn failed(message: String) -> ErrorReport {
    ErrorReport::tool_failed(message)
        .with_suggestion("Check the input format and the tool's parameters, then try again.")
}

/// The command prefix before any placeholder, used for `--probe`.
fn probe_prefix(argv: &[String]) -> Vec<String> {
    argv.iter().take_while(|a| !a.contains('{')).cloned().collect()
}

pub fn probe_subprocess(argv: &[String]) -> Result<(), String> {
    let prefix = probe_prefix(argv);
    let (prog, rest) = prefix.split_first().ok_or("argv template is empty")?;
    let out = Command::new(prog)
        .args(rest)
        .arg("--probe")
        .output()
        .map_err(|e| format!("cannot start {prog}: {e}"))?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "probe exited with {}: {}",
            out.status,
            excerpt(&String::from_utf8_lossy(&out.stderr))
        ))
    }
}

fn health_url(url: &str) -> Result<url::Url, String> {
    let mut u = url::Url::parse(url).map_err(|e| format!("bad url {url}: {e}"))?;
    u.set_path("/health");
    u.set_query(None);
    Ok(u)
}

pub fn probe_http(url: &str) -> Result<(), String> {
    let client = reqwest::blocking::Client::builder()
        .timeout(HEALTH_TIMEOUT)
        .build()
        .map_err(|e| e.to_string())?;
    let resp = client
        .get(health_url(url)?)
        .send()
        .map_err(|e| format!("health check failed: {e}"))?;
    if resp.status().is_success() {
        Ok(())
    } else {
        Err(format!("health check returned {}", resp.status()))
    }
}

fn ext(m: Modality) -> &'static str {
    match m {
        Modality::Audio => "wav",
        Modality::Image => "pgm",
        Modality::Text => "txt",
        Modality::Video | Modality::Event | Modality::Score => "json",
    }
}

fn substitute(arg: &str, ins: &[String], outs: &[String], params: &str) -> String {
    let mut s = arg.replace("{params}", params);
    for (i, p) in ins.iter().enumerate() {
        s = s.replace(&format!("{{in{i}}}"), p);
    }
    for (i, p) in outs.iter().enumerate() {
        s = s.replace(&format!("{{out{i}}}"), p);
    }
    s
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Output files are read back in output-signature order; event and text
/// outputs are also surfaced structurally.
pub fn run_subprocess(
    argv: &[String],
    inputs: &[(Modality, &[u8])],
    output_sig: &[Modality],
    params: &Params,
) -> Result<RawOutput, ErrorReport> {
    let dir = tempfile::tempdir().map_err(|e| failed(format!("cannot create scratch dir: {e}")))?;
    let mut ins = Vec::new();
    for (i, (m, bytes)) in inputs.iter().enumerate() {
        let p = dir.path().join(format!("in{i}.{}", ext(*m)));
        std::fs::write(&p, bytes).map_err(|e| failed(format!("cannot stage input {i}: {e}")))?;
        ins.push(path_str(&p));
    }
    let outs: Vec<String> = output_sig
        .iter()
        .enumerate()
        .map(|(i, m)| path_str(&dir.path().join(format!("out{i}.{}", ext(*m)))))
        .collect();
    let params_json = serde_json::to_string(params).unwrap_or_else(|_| "{}".into());
    let args: Vec<String> = argv.iter().map(|a| substitute(a, &ins, &outs, &params_json)).collect();
    let (prog, rest) = args
        .split_first()
        .ok_or_else(|| failed("argv template is empty".into()))?;
    let out = Command::new(prog)
        .args(rest)
        .output()
        .map_err(|e| failed(format!("cannot start {prog}: {e}")))?;
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    if !out.status.success() {
        return Err(failed(format!(
            "{prog} exited with {}: {}",
            out.status,
            excerpt(&stderr)
        )));
    }
    let mut raw = RawOutput {
        diagnostics: excerpt(&stderr),
        ..RawOutput::default()
    };
    for (path, m) in outs.iter().zip(output_sig) {
        let bytes = std::fs::read(path).map_err(|e| failed(format!("{prog} did not write {path}: {e}")))?;
        absorb(&mut raw, *m, bytes)?;
    }
    Ok(raw)
}

#[derive(Debug, Deserialize)]
struct EventFile {
    events: Vec<EventRecord>,
}

fn absorb(raw: &mut RawOutput, m: Modality, bytes: Vec<u8>) -> Result<(), ErrorReport> {
    match m {
        Modality::Text => raw.text = Some(String::from_utf8_lossy(&bytes).into_owned()),
        Modality::Event => {
            let f: EventFile = serde_json::from_slice(&bytes)
                .map_err(|e| failed(format!("event output is not valid JSON: {e}")))?;
            raw.events = Some(f.events);
        }
        _ => raw.payloads.push(bytes),
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct HttpManifest {
    #[serde(default)]
    outputs: Vec<String>,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    events: Option<Vec<EventRecord>>,
    #[serde(default)]
    posterior: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    diagnostics: String,
}

/// POSTs inputs as `in<i>` file parts plus a `params` JSON part. The reply
/// is a JSON manifest with base64 `outputs` in signature order.
pub fn run_http(
    url: &str,
    tool_id: &str,
    inputs: &[(Modality, &[u8])],
    output_sig: &[Modality],
    params: &Params,
) -> Result<RawOutput, ErrorReport> {
    let mut form = reqwest::blocking::multipart::Form::new()
        .text("tool_id", tool_id.to_string())
        .text("params", serde_json::to_string(params).unwrap_or_else(|_| "{}".into()));
    for (i, (m, bytes)) in inputs.iter().enumerate() {
        let part = reqwest::blocking::multipart::Part::bytes(bytes.to_vec()).file_name(format!("in{i}.{}", ext(*m)));
        form = form.part(format!("in{i}"), part);
    }
    let client = reqwest::blocking::Client::builder()
        .timeout(CALL_TIMEOUT)
        .build()
        .map_err(|e| failed(e.to_string()))?;
    let resp = client
        .post(url)
        .multipart(form)
        .send()
        .map_err(|e| failed(format!("request to {url} failed: {e}")))?;
    let status = resp.status();
    let body = resp.text().map_err(|e| failed(format!("reading reply from {url}: {e}")))?;
    if !status.is_success() {
        return Err(failed(format!("{url} answered {status}: {}", excerpt(&body))));
    }
    let m: HttpManifest =
        serde_json::from_str(&body).map_err(|e| failed(format!("reply from {url} is not a manifest: {e}")))?;
    let mut raw = RawOutput {
        text: m.text,
        events: m.events,
        posterior: m.posterior,
        diagnostics: m.diagnostics,
        ..RawOutput::default()
    };
    let b64 = base64::engine::general_purpose::STANDARD;
    let mut files = m.outputs.iter();
    for sig in output_sig {
        let needs_file = match sig {
            Modality::Text => raw.text.is_none(),
            Modality::Event => raw.events.is_none(),
            _ => true,
        };
        if !needs_file {
            continue;
        }
        let enc = files
            .next()
            .ok_or_else(|| failed(format!("{url} returned too few outputs")))?;
        let bytes = b64
            .decode(enc)
            .map_err(|e| failed(format!("output from {url} is not base64: {e}")))?;
        absorb(&mut raw, *sig, bytes)?;
    }
    Ok(raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placeholders() {
        let s = substitute("--in={in0},{in1} -o {out0} -p {params}", &["a".into(), "b".into()], &["c".into()], "{}");
        assert_eq!(s, "--in=a,b -o c -p {}");
    }

    #[test]
    fn probe_prefix_stops_at_placeholder() {
        let argv: Vec<String> = ["python3", "tool.py", "{in0}", "{out0}"].iter().map(|s| s.to_string()).collect();
        assert_eq!(probe_prefix(&argv), vec!["python3", "tool.py"]);
    }

    #[test]
    fn health_path() {
        assert_eq!(health_url("http://h:9/infer?x=1").unwrap().as_str(), "http://h:9/health");
    }

    #[cfg(unix)]
    #[test]
    fn subprocess_roundtrip_and_failure() {
        let argv: Vec<String> = ["sh", "-c", "cp {in0} {out0}"].iter().map(|s| s.to_string()).collect();
        let raw = run_subprocess(&argv, &[(Modality::Text, b"hi")], &[Modality::Text], &Params::new()).unwrap();
        assert_eq!(raw.text.as_deref(), Some("hi"));

        let argv: Vec<String> = ["sh", "-c", "echo boom >&2; exit 3"].iter().map(|s| s.to_string()).collect();
        let e = run_subprocess(&argv, &[], &[Modality::Audio], &Params::new()).unwrap_err();
        assert_eq!(e.code, crate::types::ErrorCode::ToolExecutionFailed);
        assert!(e.message.contains("boom"));
    }
}
