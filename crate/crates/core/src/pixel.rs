//! Pixel-Words, Screen-Sentences and the icon category taxonomy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::BBox;

/// The 31 most-clicked icon categories plus `other`, alphabetical.
pub const ICON_CATEGORIES: [&str; 32] = [
    "add",
    "arrow_backward",
    "arrow_downward",
    "arrow_forward",
    "arrow_upward",
    "avatar",
    "calendar",
    "call",
    "camera",
    "cart",
    "chat",
    "check",
    "close",
    "delete",
    "download",
    "edit",
    "favorite",
    "filter",
    "gallery",
    "location",
    "menu",
    "microphone",
    "more",
    "other",
    "pause",
    "play",
    "question_mark",
    "refresh",
    "search",
    "send",
    "settings",
    "share",
];

pub const NUM_CATEGORIES: usize = ICON_CATEGORIES.len();
pub const OTHER_CATEGORY: usize = 23;

/// Case-insensitive exact lookup; anything unknown maps to `other`.
pub fn map_icon_category(raw_label: &str) -> usize {
    let key = raw_label.trim().to_lowercase();
    ICON_CATEGORIES
        .iter()
        .position(|c| *c == key)
        .unwrap_or(OTHER_CATEGORY)
}

pub fn category_name(category: usize) -> Option<&'static str> {
    ICON_CATEGORIES.get(category).copied()
}

#[derive(Debug, Error, PartialEq)]
pub enum PixelError {
    #[error("text pixel-word has empty content")]
    EmptyText,
    #[error("graphic category {0} outside 0..{NUM_CATEGORIES}")]
    BadCategory(usize),
    #[error("pixel-word of kind `{0}` needs field `{1}`")]
    MissingField(String, &'static str),
    #[error("unknown pixel-word kind `{0}`")]
    UnknownKind(String),
    #[error("relation ({0}, {1}) is not a valid pair of distinct pixel-word indices")]
    BadRelation(usize, usize),
    #[error("relation label {0} is not 0 or 1")]
    BadRelationLabel(u8),
}

#[derive(Clone, Debug, PartialEq)]
pub enum PixelKind {
    Text(String),
    Graphic(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPixelWord", into = "RawPixelWord")]
pub struct PixelWord {
    pub kind: PixelKind,
    pub bbox: BBox,
    pub clickable: Option<bool>,
}

impl PixelWord {
    pub fn text(content: impl Into<String>, bbox: BBox) -> Result<Self, PixelError> {
        let content = content.into();
        if content.trim().is_empty() {
            return Err(PixelError::EmptyText);
        }
        Ok(Self {
            kind: PixelKind::Text(content),
            bbox,
            clickable: None,
        })
    }

    pub fn graphic(category: usize, bbox: BBox) -> Result<Self, PixelError> {
        if category >= NUM_CATEGORIES {
            return Err(PixelError::BadCategory(category));
        }
        Ok(Self {
            kind: PixelKind::Graphic(category),
            bbox,
            clickable: None,
        })
    }

    pub fn with_clickable(mut self, clickable: Option<bool>) -> Self {
        self.clickable = clickable;
        self
    }

    pub fn is_text(&self) -> bool {
        matches!(self.kind, PixelKind::Text(_))
    }

    pub fn is_graphic(&self) -> bool {
        matches!(self.kind, PixelKind::Graphic(_))
    }
}

#[derive(Serialize, Deserialize)]
struct RawPixelWord {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    category: Option<usize>,
    bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    clickable: Option<bool>,
}

impl TryFrom<RawPixelWord> for PixelWord {
    type Error = PixelError;

    fn try_from(r: RawPixelWord) -> Result<Self, PixelError> {
        let pw = match r.kind.as_str() {
            "text" => Self::text(r.text.ok_or(PixelError::MissingField(r.kind.clone(), "text"))?, r.bbox)?,
            "graphic" => Self::graphic(r.category.ok_or(PixelError::MissingField(r.kind.clone(), "category"))?, r.bbox)?,
            other => return Err(PixelError::UnknownKind(other.to_string())),
        };
        Ok(pw.with_clickable(r.clickable))
    }
}

impl From<PixelWord> for RawPixelWord {
    fn from(p: PixelWord) -> Self {
        let (kind, text, category) = match p.kind {
            PixelKind::Text(t) => ("text", Some(t), None),
            PixelKind::Graphic(c) => ("graphic", None, Some(c)),
        };
        Self {
            kind: kind.to_string(),
            text,
            category,
            bbox: p.bbox,
            clickable: p.clickable,
        }
    }
}

/// All Pixel-Words of one screenshot plus optional task labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScreen", into = "RawScreen")]
pub struct ScreenSentence {
    pub screen_id: String,
    pub screen_width: u32,
    pub screen_height: u32,
    pub pixel_words: Vec<PixelWord>,
    pub app_type: Option<usize>,
    /// `(i, j, label)` with `label` 0 or 1.
    pub relations: Option<Vec<(usize, usize, u8)>>,
    pub raster_path: Option<String>,
}

impl ScreenSentence {
    pub fn new(screen_id: impl Into<String>, width: u32, height: u32, pixel_words: Vec<PixelWord>) -> Self {
        Self {
            screen_id: screen_id.into(),
            screen_width: width,
            screen_height: height,
            pixel_words,
            app_type: None,
            relations: None,
            raster_path: None,
        }
    }

    pub fn validate(&self) -> Result<(), PixelError> {
        let n = self.pixel_words.len();
        for &(i, j, label) in self.relations.iter().flatten() {
            if i == j || i >= n || j >= n {
                return Err(PixelError::BadRelation(i, j));
            }
            if label > 1 {
                return Err(PixelError::BadRelationLabel(label));
            }
        }
        Ok(())
    }

    pub fn screen_box(&self) -> BBox {
        BBox::new(0.0, 0.0, f64::from(self.screen_width), f64::from(self.screen_height))
    }

    pub fn text_count(&self) -> usize {
        self.pixel_words.iter().filter(|p| p.is_text()).count()
    }
}

#[derive(Serialize, Deserialize)]
struct RawScreen {
    screen_id: String,
    width: u32,
    height: u32,
    pixel_words: Vec<PixelWord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    app_type: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    relations: Option<Vec<(usize, usize, u8)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    raster_path: Option<String>,
}

impl TryFrom<RawScreen> for ScreenSentence {
    type Error = PixelError;

    fn try_from(r: RawScreen) -> Result<Self, PixelError> {
        let s = Self {
            screen_id: r.screen_id,
            screen_width: r.width,
            screen_height: r.height,
            pixel_words: r.pixel_words,
            app_type: r.app_type,
            relations: r.relations,
            raster_path: r.raster_path,
        };
        s.validate()?;
        Ok(s)
    }
}

impl From<ScreenSentence> for RawScreen {
    fn from(s: ScreenSentence) -> Self {
        Self {
            screen_id: s.screen_id,
            width: s.screen_width,
            height: s.screen_height,
            pixel_words: s.pixel_words,
            app_type: s.app_type,
            relations: s.relations,
            raster_path: s.raster_path,
        }
    }
}
