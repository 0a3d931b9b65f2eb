use std::fmt;

use serde::{Deserialize, Serialize};

use crate::types::Modality;

/// Task families, grouped by input/output modality, plus a chat fallback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskFamily {
    AudioToText,
    AudioToAudio,
    AudioToEvent,
    AudioToVideo,
    TextToAudio,
    ImageToAudio,
    ScoreToAudio,
    Chat,
}

impl TaskFamily {
    /// The seven tool-backed families, in presentation order.
    pub const SUPPORTED: [TaskFamily; 7] = [
        TaskFamily::AudioToText,
        TaskFamily::AudioToAudio,
        TaskFamily::AudioToEvent,
        TaskFamily::AudioToVideo,
        TaskFamily::TextToAudio,
        TaskFamily::ImageToAudio,
        TaskFamily::ScoreToAudio,
    ];

    pub fn from_io(input: Modality, output: Modality) -> Option<TaskFamily> {
        use Modality::*;
        Some(match (input, output) {
            (Audio, Text) => TaskFamily::AudioToText,
            (Audio, Audio) => TaskFamily::AudioToAudio,
            (Audio, Event) => TaskFamily::AudioToEvent,
            (Audio, Video) => TaskFamily::AudioToVideo,
            (Text, Audio) => TaskFamily::TextToAudio,
            (Image, Audio) => TaskFamily::ImageToAudio,
            (Score, Audio) => TaskFamily::ScoreToAudio,
            _ => return None,
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            TaskFamily::AudioToText => "Audio-to-Text",
            TaskFamily::AudioToAudio => "Audio-to-Audio",
            TaskFamily::AudioToEvent => "Audio-to-Event",
            TaskFamily::AudioToVideo => "Audio-to-Video",
            TaskFamily::TextToAudio => "Text-to-Audio",
            TaskFamily::ImageToAudio => "Image-to-Audio",
            TaskFamily::ScoreToAudio => "Score-to-Audio",
            TaskFamily::Chat => "Chat",
        }
    }

    /// "Audio-to-Text, Audio-to-Audio, ..." for user-facing suggestions.
    pub fn supported_list() -> String {
        Self::SUPPORTED
            .iter()
            .map(|f| f.label())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl fmt::Display for TaskFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Supported audio tasks. `AudioCaption` and `AudioToText` name the same
/// task; [`TaskKind::canonical`] folds them together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    SpeechRecognition,
    SpeechTranslation,
    StyleTransfer,
    SpeechEnhancement,
    SpeechSeparation,
    MonoToBinaural,
    AudioInpainting,
    SoundExtraction,
    SoundDetection,
    TalkingHeadSynthesis,
    TextToSpeech,
    TextToAudio,
    AudioToText,
    AudioCaption,
    ImageToAudio,
    SingingSynthesis,
}

impl TaskKind {
    pub const ALL: [TaskKind; 16] = [
        TaskKind::SpeechRecognition,
        TaskKind::SpeechTranslation,
        TaskKind::StyleTransfer,
        TaskKind::SpeechEnhancement,
        TaskKind::SpeechSeparation,
        TaskKind::MonoToBinaural,
        TaskKind::AudioInpainting,
        TaskKind::SoundExtraction,
        TaskKind::SoundDetection,
        TaskKind::TalkingHeadSynthesis,
        TaskKind::TextToSpeech,
        TaskKind::TextToAudio,
        TaskKind::AudioToText,
        TaskKind::AudioCaption,
        TaskKind::ImageToAudio,
        TaskKind::SingingSynthesis,
    ];

    pub fn canonical(self) -> TaskKind {
        match self {
            TaskKind::AudioCaption => TaskKind::AudioToText,
            k => k,
        }
    }

    pub fn same_task(self, other: TaskKind) -> bool {
        self.canonical() == other.canonical()
    }

    /// Input modality of the primary slot.
    pub fn input_modality(self) -> Modality {
        match self {
            TaskKind::TextToSpeech | TaskKind::TextToAudio => Modality::Text,
            TaskKind::ImageToAudio => Modality::Image,
            TaskKind::SingingSynthesis => Modality::Score,
            _ => Modality::Audio,
        }
    }

    pub fn output_modality(self) -> Modality {
        match self {
            TaskKind::SpeechRecognition
            | TaskKind::SpeechTranslation
            | TaskKind::AudioToText
            | TaskKind::AudioCaption => Modality::Text,
            TaskKind::SoundDetection => Modality::Event,
            TaskKind::TalkingHeadSynthesis => Modality::Video,
            _ => Modality::Audio,
        }
    }

    /// Full input signature of the shipped executor for this task.
    pub fn input_signature(self) -> Vec<Modality> {
        match self {
            TaskKind::StyleTransfer => vec![Modality::Audio, Modality::Audio],
            k => vec![k.input_modality()],
        }
    }

    pub fn output_signature(self) -> Vec<Modality> {
        match self {
            TaskKind::SpeechSeparation => vec![Modality::Audio, Modality::Audio],
            k => vec![k.output_modality()],
        }
    }

    pub fn family(self) -> TaskFamily {
        TaskFamily::from_io(self.input_modality(), self.output_modality())
            .expect("every task kind has an I/O family")
    }

    pub fn label(self) -> &'static str {
        match self {
            TaskKind::SpeechRecognition => "Speech Recognition",
            TaskKind::SpeechTranslation => "Speech Translation",
            TaskKind::StyleTransfer => "Style Transfer",
            TaskKind::SpeechEnhancement => "Speech Enhancement",
            TaskKind::SpeechSeparation => "Speech Separation",
            TaskKind::MonoToBinaural => "Mono-to-Binaural",
            TaskKind::AudioInpainting => "Audio Inpainting",
            TaskKind::SoundExtraction => "Sound Extraction",
            TaskKind::SoundDetection => "Sound Detection",
            TaskKind::TalkingHeadSynthesis => "Talking Head Synthesis",
            TaskKind::TextToSpeech => "Text-to-Speech",
            TaskKind::TextToAudio => "Text-to-Audio",
            TaskKind::AudioToText => "Audio-to-Text",
            TaskKind::AudioCaption => "Audio Caption",
            TaskKind::ImageToAudio => "Image-to-Audio",
            TaskKind::SingingSynthesis => "Singing Synthesis",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL
            .into_iter()
            .find(|k| format!("{k:?}").eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown task '{s}'"))
    }
}
