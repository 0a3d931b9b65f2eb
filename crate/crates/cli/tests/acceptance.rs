//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any failed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use audiochat_cli::{check_expected_inputs, read_script, run_script};
use audiochat_core::analysis::{Params, RuleEngine, TaskFamily, TaskKind};
use audiochat_core::evalkit::consistency::parse_seeds;
use audiochat_core::evalkit::fixtures::fixture_bytes;
use audiochat_core::evalkit::robustness::shipped_scripts;
use audiochat_core::evalkit::{aggregate_ratings, expand_seeds, run_consistency, run_robustness, RatingRecord};
use audiochat_core::execution::stubs::{
    enhance, event_detect, mono_to_binaural, run_stub, talking_head, StubInput,
};
use audiochat_core::modality::{read_wav, transform_query, AudioBuffer, GrayImage, SineCodecTranscriber};
use audiochat_core::response::render_waveform_image;
use audiochat_core::service::read_journal;
use audiochat_core::types::Origin;
use audiochat_core::{Description, Modality, Orchestrator, Query, Registry, TurnRequest};
use rand::{Rng, SeedableRng};
use statrs::distribution::{ContinuousCDF, StudentsT};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);
type Replay = (Vec<Vec<String>>, Vec<u8>, Vec<audiochat_core::Turn>);

fn orch() -> (tempfile::TempDir, Orchestrator) {
    let d = tempfile::tempdir().unwrap();
    let o = Orchestrator::new(d.path(), Registry::builtin()).unwrap();
    (d, o)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("demo")
}

fn codec_round_trip() -> Check {
    let mut rng = rand::rngs::StdRng::seed_from_u64(1000);
    let params = Params::new();
    let started = Instant::now();
    for i in 0..1000 {
        let len = rng.random_range(1..=64);
        let s: String = (0..len).map(|_| rng.random_range(0x20u8..=0x7e) as char).collect();
        let text = StubInput {
            modality: Modality::Text,
            bytes: s.as_bytes(),
        };
        let wav = run_stub("tts", &[text], &params).map_err(|e| e.to_string())?.payloads.remove(0);
        let audio = StubInput {
            modality: Modality::Audio,
            bytes: &wav,
        };
        let back = run_stub("asr", &[audio], &params).map_err(|e| e.to_string())?.text;
        ensure(back.as_deref() == Some(s.as_str()), || format!("string {i} {s:?} came back as {back:?}"))?;
    }
    let took = started.elapsed();
    ensure(took < Duration::from_secs(5), || format!("took {took:?}"))?;
    Ok(format!("1000/1000 strings in {:.2} s", took.as_secs_f64()))
}

fn transform_law() -> Check {
    let (_d, o) = orch();
    let mut rng = rand::rngs::StdRng::seed_from_u64(3);
    let mut n = 0;
    for _ in 0..200 {
        let len = rng.random_range(0..80);
        let s: String = (0..len).map(|_| rng.random_range(0x20u8..=0x7e) as char).collect();
        let q = Query {
            description: Description::Text(s),
            resources: vec![],
        };
        let out = transform_query(q.clone(), o.store(), &SineCodecTranscriber).map_err(|e| e.to_string())?;
        ensure(out == q, || format!("text query changed: {q:?} -> {out:?}"))?;
        n += 1;
    }
    let spoken = [
        "say 'good morning'",
        "transcribe the audio from turn 1",
        "detect the sound events in this clip",
        "what would this picture sound like",
        "generate the sound of rain",
        "hello",
        "translate it into german",
        "sing this score",
    ];
    for text in spoken {
        let wav = fixture_bytes(&format!("fixture:speech:{text}")).map_err(|e| e.to_string())?;
        let r = o
            .store()
            .store_resource(&wav, "q.wav", Origin::UserUpload { turn: 1 })
            .map_err(|e| e.to_string())?;
        let q = Query {
            description: Description::Audio(r.id.clone()),
            resources: vec![r.id],
        };
        let out = transform_query(q.clone(), o.store(), &SineCodecTranscriber).map_err(|e| e.to_string())?;
        ensure(out.description == Description::Text(text.into()), || {
            format!("{text:?} transcribed as {:?}", out.description)
        })?;
        ensure(out.resources == q.resources, || "resource list changed".into())?;
        n += 1;
    }
    Ok(format!("{n}/{n} queries"))
}

fn routing_consistency() -> Check {
    let seeds = parse_seeds(audiochat_core::evalkit::SHIPPED_SEEDS).map_err(|e| e.to_string())?;
    let corpus = expand_seeds(&seeds, 5, &RuleEngine::default()).map_err(|e| e.to_string())?;
    let (d, o) = orch();
    let started = Instant::now();
    let r = run_consistency(&corpus, &o, d.path());
    let took = started.elapsed();
    ensure(r.total == 300, || format!("{} probes", r.total))?;
    ensure(r.overall_accuracy == 1.0, || format!("accuracy {} misses {:?}", r.overall_accuracy, r.confusions))?;
    ensure(took < Duration::from_secs(10), || format!("took {took:?}"))?;
    Ok(format!("300 probes, accuracy 1.00, {:.2} s", took.as_secs_f64()))
}

/// Input and output columns per task, written out independently of the
/// crate's own tables.
fn io_columns(t: TaskKind) -> (Modality, Modality) {
    use Modality::*;
    use TaskKind::*;
    match t {
        SpeechRecognition | SpeechTranslation | AudioToText | AudioCaption => (Audio, Text),
        StyleTransfer | SpeechEnhancement | SpeechSeparation | MonoToBinaural | AudioInpainting
        | SoundExtraction => (Audio, Audio),
        SoundDetection => (Audio, Event),
        TalkingHeadSynthesis => (Audio, Video),
        TextToSpeech | TextToAudio => (Text, Audio),
        ImageToAudio => (Image, Audio),
        SingingSynthesis => (Score, Audio),
    }
}

fn expected_family(t: TaskKind) -> TaskFamily {
    use Modality::*;
    match io_columns(t) {
        (Audio, Text) => TaskFamily::AudioToText,
        (Audio, Audio) => TaskFamily::AudioToAudio,
        (Audio, Event) => TaskFamily::AudioToEvent,
        (Audio, Video) => TaskFamily::AudioToVideo,
        (Text, Audio) => TaskFamily::TextToAudio,
        (Image, Audio) => TaskFamily::ImageToAudio,
        (Score, Audio) => TaskFamily::ScoreToAudio,
        other => panic!("no family for {other:?}"),
    }
}

fn family_totality() -> Check {
    let speech = "fixture:speech:hello world";
    let probes: [(TaskKind, &str, &[&str]); 16] = [
        (TaskKind::SpeechRecognition, "transcribe this", &[speech]),
        (TaskKind::SpeechTranslation, "translate this into spanish", &[speech]),
        (TaskKind::StyleTransfer, "transfer the style of the second uploaded file onto the first uploaded file", &[speech, "fixture:tone:300:1"]),
        (TaskKind::SpeechEnhancement, "enhance this", &["fixture:noisy:hello"]),
        (TaskKind::SpeechSeparation, "separate the speakers", &[speech]),
        (TaskKind::MonoToBinaural, "make this binaural", &[speech]),
        (TaskKind::AudioInpainting, "inpaint this from 0.2 s to 0.4 s", &[speech]),
        (TaskKind::SoundExtraction, "extract the loud part", &["fixture:burst"]),
        (TaskKind::SoundDetection, "detect events in this", &["fixture:burst"]),
        (TaskKind::TalkingHeadSynthesis, "make a talking head for this", &[speech]),
        (TaskKind::TextToSpeech, "say 'hi there'", &[]),
        (TaskKind::TextToAudio, "generate the sound of a bell", &[]),
        (TaskKind::AudioToText, "audio to text please", &[speech]),
        (TaskKind::AudioCaption, "caption this", &["fixture:burst"]),
        (TaskKind::ImageToAudio, "turn this image to audio", &["fixture:image"]),
        (TaskKind::SingingSynthesis, "sing this", &["fixture:score:60,64,67"]),
    ];
    let (_d, o) = orch();
    let mut ok = 0;
    for (kind, q, uploads) in probes {
        let mut req = TurnRequest::text(q);
        for u in uploads {
            req = req.with_upload(*u, fixture_bytes(u).map_err(|e| e.to_string())?);
        }
        let s = o.create_session(None).map_err(|e| e.to_string())?;
        let turn = o.post_turn(&s.session_id, req).map_err(|e| e.to_string())?;
        let routed = turn.args.as_ref().map(|a| a.task);
        let family = routed.map(|t| t.family());
        ensure(family == Some(expected_family(kind)) && turn.error.is_none(), || {
            format!("{kind}: routed to {routed:?} ({family:?}), error {:?}", turn.error)
        })?;
        ok += 1;
    }
    Ok(format!("{ok}/16 task kinds"))
}

fn robustness() -> Check {
    let (d, o) = orch();
    let r = run_robustness(&shipped_scripts(), &o, d.path()).map_err(|e| e.to_string())?;
    let failed: Vec<_> = r
        .scripts
        .iter()
        .flat_map(|s| s.steps.iter().filter(|st| !st.passed).map(move |st| format!("{} step {}: {:?}", s.name, st.step, st.failures)))
        .collect();
    ensure(failed.is_empty() && r.passed == 4, || failed.join("; "))?;
    Ok(format!("{}/4 scripts", r.passed))
}

fn scripted_dialogue() -> Check {
    let script = demo_dir().join("dialogue.json");
    let entries = read_script(&script).map_err(|e| e.to_string())?;
    ensure(entries.len() == 12, || format!("{} rounds", entries.len()))?;
    let mut runs = Vec::new();
    for _ in 0..2 {
        let (_d, o) = orch();
        let t = run_script(&o, None, &entries, &demo_dir()).map_err(|e| e.to_string())?;
        runs.push(t);
    }
    let t = &runs[0];
    let errors: Vec<_> = t.turns.iter().filter_map(|t| t.error.as_ref().map(|e| format!("turn {}: {e}", t.index))).collect();
    ensure(errors.is_empty(), || errors.join("; "))?;
    let problems = check_expected_inputs(&entries, t);
    ensure(problems.is_empty(), || problems.join("; "))?;
    for turn in &t.turns {
        ensure(!turn.attachments.is_empty(), || format!("turn {} has no attachment", turn.index))?;
    }
    let ids = |tr: &audiochat_cli::Transcript| tr.turns.iter().map(|t| t.outputs.clone()).collect::<Vec<_>>();
    ensure(ids(&runs[0]) == ids(&runs[1]), || "resource ids differ between runs".into())?;
    ensure(runs[0] == runs[1], || "transcripts differ between runs".into())?;
    let refs: usize = entries.iter().map(|e| e.expect_inputs.len()).sum();
    Ok(format!("12 rounds, {refs} annotated references resolved, identical reruns"))
}

fn rating_aggregation() -> Check {
    let recs: Vec<_> = [80u32, 80, 100, 60, 80]
        .iter()
        .enumerate()
        .map(|(i, &r)| RatingRecord {
            task_name: "asr".into(),
            paraphrase_id: format!("p{i}"),
            rater_id: format!("r{i}"),
            rating: r,
        })
        .collect();
    let s = &aggregate_ratings(&recs).tasks["asr"];
    let xs = [80.0f64, 80.0, 100.0, 60.0, 80.0];
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let t = StudentsT::new(0.0, 1.0, n - 1.0).unwrap().inverse_cdf(0.975);
    let (lo, hi) = (mean - t * sd / n.sqrt(), mean + t * sd / n.sqrt());
    let (clo, chi) = (s.ci_low.ok_or("no CI")?, s.ci_high.ok_or("no CI")?);
    ensure((s.mean - 80.0).abs() < 1e-9, || format!("mean {}", s.mean))?;
    ensure((clo - lo).abs() < 0.01 && (chi - hi).abs() < 0.01, || format!("CI [{clo}, {chi}] vs oracle [{lo}, {hi}]"))?;
    ensure((clo - 62.44).abs() < 0.01 && (chi - 97.56).abs() < 0.01, || format!("CI [{clo}, {chi}]"))?;
    let flat: Vec<_> = recs.iter().map(|r| RatingRecord { rating: 60, ..r.clone() }).collect();
    let f = &aggregate_ratings(&flat).tasks["asr"];
    ensure(f.ci_low == Some(60.0) && f.ci_high == Some(60.0), || format!("zero variance gave {f:?}"))?;
    Ok(format!("mean {:.2}, CI [{clo:.2}, {chi:.2}], oracle [{lo:.2}, {hi:.2}]", s.mean))
}

/// Frame RMS and event runs recomputed from the detector's definition.
fn oracle_events(x: &[f32], rate: f64) -> Vec<(f64, f64)> {
    let (frame, hop) = (400, 160);
    let n = if x.len() <= frame { 1 } else { 1 + (x.len() - frame) / hop };
    let loud: Vec<bool> = (0..n)
        .map(|i| {
            let w = &x[(i * hop).min(x.len())..(i * hop + frame).min(x.len())];
            let e: f64 = w.iter().map(|&s| (s as f64).powi(2)).sum();
            (e / frame as f64).sqrt() > 0.1
        })
        .collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if !loud[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && loud[i] {
            i += 1;
        }
        if i - start >= 5 {
            out.push((start as f64 * hop as f64 / rate, i as f64 * hop as f64 / rate));
        }
    }
    out
}

fn dsp_oracles() -> Check {
    let rate = 16_000u32;
    let mut rng = rand::rngs::StdRng::seed_from_u64(20);
    let mut events = 0;
    for sig in 0..20 {
        let len = rng.random_range(8_000..32_000);
        let mut x = vec![0.0f32; len];
        for _ in 0..rng.random_range(1..4) {
            let start = rng.random_range(0..len);
            let dur = rng.random_range(400..8_000).min(len - start);
            let amp = rng.random_range(0.05f32..0.9);
            let f = rng.random_range(100.0f32..2_000.0);
            for t in 0..dur {
                x[start + t] += amp * (2.0 * std::f32::consts::PI * f * t as f32 / rate as f32).sin();
            }
        }
        let want = oracle_events(&x, rate as f64);
        let got = event_detect(&AudioBuffer::mono(rate, x).unwrap()).map_err(|e| e.to_string())?;
        ensure(got.events.len() == want.len(), || format!("signal {sig}: {} events vs oracle {}", got.events.len(), want.len()))?;
        for (e, (on, off)) in got.events.iter().zip(&want) {
            ensure((e.onset_s - on).abs() <= 0.025 && (e.offset_s - off).abs() <= 0.025, || {
                format!("signal {sig}: [{}, {}] vs oracle [{on}, {off}]", e.onset_s, e.offset_s)
            })?;
        }
        events += want.len();
    }

    let dc: Vec<f32> = (0..16_000).map(|t| 0.3 + 0.2 * (t as f32 * 0.05).sin()).collect();
    let y = enhance(&AudioBuffer::mono(rate, dc).unwrap()).map_err(|e| e.to_string())?;
    let peak = y.channels[0].iter().fold(0.0f64, |m, &s| m.max((s as f64).abs()));
    ensure((peak - 0.9).abs() <= 1e-6, || format!("enhance peak {peak}"))?;

    let mut imp = vec![0.0f32; 100];
    imp[0] = 1.0;
    let b = mono_to_binaural(&AudioBuffer::mono(rate, imp).unwrap()).map_err(|e| e.to_string())?;
    let at = b.channels[1].iter().position(|&s| s == 1.0);
    ensure(at == Some(16) && b.channels[1].len() == 100, || format!("impulse moved to {at:?}"))?;

    let amps = [0.0f32, 0.1, 0.25, 0.5, 0.9];
    let mut x = Vec::new();
    for &a in &amps {
        x.extend((0..1_600).map(|t| a * (2.0 * std::f32::consts::PI * 400.0 * t as f32 / rate as f32).sin()));
    }
    let frames = talking_head(&AudioBuffer::mono(rate, x.clone()).unwrap()).map_err(|e| e.to_string())?;
    ensure(frames.len() == amps.len(), || format!("{} frames", frames.len()))?;
    for (k, f) in frames.iter().enumerate() {
        let w = &x[k * 1_600..(k + 1) * 1_600];
        let r = (w.iter().map(|&s| (s as f64).powi(2)).sum::<f64>() / w.len() as f64).sqrt();
        let h = (20.0 * (r / 0.5).min(1.0)).round() as usize;
        let col = 32;
        let painted = (0..f.height).filter(|&row| f.get(row, col) == 255).count();
        ensure(painted == h, || format!("frame {k}: mouth {painted} px vs formula {h}"))?;
    }
    Ok(format!("20 signals ({events} events), peak {peak:.7}, delay 16, {} mouth heights", frames.len()))
}

fn determinism_and_journal() -> Check {
    let audio = read_wav(&fixture_bytes("fixture:speech:determinism").unwrap()).unwrap();
    let a = render_waveform_image(&audio).encode();
    let b = render_waveform_image(&audio).encode();
    ensure(a == b, || "waveform images differ".into())?;
    let img = GrayImage::decode(&a).map_err(|e| e.to_string())?;
    ensure((img.width, img.height) == (512, 128), || format!("{}x{}", img.width, img.height))?;

    let queries = [
        "say 'replay me'",
        "transcribe it",
        "generate the sound of wind",
        "detect events in the audio from turn 3",
        "how are you?",
    ];
    let run = || -> Result<Replay, String> {
        let (d, o) = orch();
        let s = o.create_session(None).map_err(|e| e.to_string())?;
        let mut ids = Vec::new();
        for q in queries {
            let t = o.post_turn(&s.session_id, TurnRequest::text(q)).map_err(|e| e.to_string())?;
            ids.push(t.outputs.iter().map(|r| r.0.clone()).collect());
        }
        let journal = std::fs::read(d.path().join("sessions").join(format!("{}.jsonl", s.session_id)))
            .map_err(|e| e.to_string())?;
        let turns = o.get_session(&s.session_id).map_err(|e| e.to_string())?.turns;
        Ok((ids, journal, turns))
    };
    let (ids1, journal, turns) = run()?;
    let (ids2, _, _) = run()?;
    ensure(ids1 == ids2, || "replay produced different resource ids".into())?;

    let restored = read_journal(&journal);
    ensure(restored.turns == turns, || "journal does not restore the session".into())?;
    for cut in 0..=journal.len() {
        let r = read_journal(&journal[..cut]);
        ensure(r.turns.len() <= turns.len() && r.turns[..] == turns[..r.turns.len()], || {
            format!("prefix of {cut} bytes restored a non-prefix context")
        })?;
    }
    Ok(format!("PGM 512x128 stable, replay ids equal, {} crash prefixes restore", journal.len() + 1))
}

fn latency() -> Check {
    let (_d, o) = orch();
    let s = o.create_session(None).map_err(|e| e.to_string())?;
    let mut worst = Duration::ZERO;
    for q in ["say 'how fast is this'", "transcribe it", "detect events in it", "make a talking head for it"] {
        let started = Instant::now();
        let t = o.post_turn(&s.session_id, TurnRequest::text(q)).map_err(|e| e.to_string())?;
        worst = worst.max(started.elapsed());
        ensure(t.error.is_none(), || format!("{q}: {:?}", t.error))?;
    }
    ensure(worst < Duration::from_secs(1), || format!("slowest turn {worst:?}"))?;
    Ok(format!("slowest stub turn {:.1} ms", worst.as_secs_f64() * 1e3))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("codec round trip", codec_round_trip),
        ("text queries pass through, spoken queries transcribe", transform_law),
        ("routing consistency", routing_consistency),
        ("family totality", family_totality),
        ("robustness scenarios", robustness),
        ("12-round scripted dialogue", scripted_dialogue),
        ("rating aggregation", rating_aggregation),
        ("stub DSP oracles", dsp_oracles),
        ("determinism, rendering, journal replay", determinism_and_journal),
        ("stub turn latency", latency),
    ];
    let mut results = BTreeMap::new();
    for (name, check) in criteria {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match &outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => println!("FAIL  {name}: {why}"),
        }
        results.insert(name, outcome.is_ok());
    }
    let passed = results.values().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
