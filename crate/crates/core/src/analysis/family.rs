//! Task handler: picks a task family from the query's I/O modalities.

use super::intent::IntentSketch;
use super::task::{TaskFamily, TaskKind};
use crate::types::Modality;

/// Input modality implied by the attachments and the intent.
///
/// The description itself is always text, so text-input tasks are satisfied
/// without attachments. A non-text attachment otherwise wins, which is how an
/// attached image turns "generate audio" into an image-to-audio request.
pub fn input_modality(attached: &[Modality], intent: &IntentSketch) -> Modality {
    let want = intent.task.map(TaskKind::input_modality);
    if let Some(w) = want {
        if w != Modality::Text && attached.contains(&w) {
            return w;
        }
    }
    let non_text = attached.iter().copied().find(|&m| m != Modality::Text);
    match (want, non_text) {
        (Some(Modality::Text), Some(Modality::Image))
            if intent.output_modality() == Some(Modality::Audio) =>
        {
            Modality::Image
        }
        (Some(Modality::Text), _) => Modality::Text,
        (Some(_), Some(m)) => m,
        (Some(w), None) if !intent.refs.is_empty() => w,
        _ => Modality::Text,
    }
}

/// Returns the family, `Some(Chat)` for small talk, or `None` when the
/// request maps to no supported family.
pub fn classify_family(attached: &[Modality], intent: &IntentSketch) -> Option<TaskFamily> {
    let Some(out) = intent.output_modality() else {
        return if intent.generative {
            None
        } else {
            Some(TaskFamily::Chat)
        };
    };
    TaskFamily::from_io(input_modality(attached, intent), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::intent::parse_intent;
    use crate::context::ReferenceExpr;

    fn sketch(task: TaskKind) -> IntentSketch {
        IntentSketch {
            task: Some(task),
            ..Default::default()
        }
    }

    #[test]
    fn transcribe_audio_resource() {
        let i = parse_intent("transcribe").first().clone();
        assert_eq!(
            classify_family(&[Modality::Audio], &i),
            Some(TaskFamily::AudioToText)
        );
    }

    #[test]
    fn generate_speech_without_resources() {
        let i = parse_intent("generate speech saying 'good morning'").first().clone();
        assert_eq!(i.task, Some(TaskKind::TextToSpeech));
        assert_eq!(classify_family(&[], &i), Some(TaskFamily::TextToAudio));
    }

    #[test]
    fn small_talk_and_unsupported() {
        let i = parse_intent("how are you?").first().clone();
        assert_eq!(classify_family(&[], &i), Some(TaskFamily::Chat));
        let i = parse_intent("write a sonnet as a PDF").first().clone();
        assert_eq!(classify_family(&[], &i), None);
        // detection with nothing to detect in
        let i = parse_intent("detect dolphins' dreams").first().clone();
        assert_eq!(classify_family(&[], &i), None);
    }

    #[test]
    fn attached_image_upgrades_text_to_audio() {
        let i = parse_intent("generate audio for this").first().clone();
        assert_eq!(i.task, Some(TaskKind::TextToAudio));
        assert_eq!(
            classify_family(&[Modality::Image], &i),
            Some(TaskFamily::ImageToAudio)
        );
        assert_eq!(classify_family(&[], &i), Some(TaskFamily::TextToAudio));
    }

    #[test]
    fn referenced_context_supplies_input() {
        let mut i = sketch(TaskKind::SoundDetection);
        i.refs.push(ReferenceExpr::FromTurn(1));
        assert_eq!(classify_family(&[], &i), Some(TaskFamily::AudioToEvent));
    }

    #[test]
    fn text_input_tasks_ignore_audio_attachments() {
        let i = sketch(TaskKind::TextToSpeech);
        assert_eq!(
            classify_family(&[Modality::Audio], &i),
            Some(TaskFamily::TextToAudio)
        );
    }

    #[test]
    fn every_kind_lands_in_its_family() {
        for k in TaskKind::ALL {
            let mut i = sketch(k);
            let attached = match k.input_modality() {
                Modality::Text => vec![],
                m => vec![m],
            };
            assert_eq!(classify_family(&attached, &i), Some(k.family()), "{k}");
            // same with a context reference instead of an attachment
            i.refs.push(ReferenceExpr::Latest);
            assert_eq!(classify_family(&[], &i), Some(k.family()), "{k} by ref");
        }
    }
}
