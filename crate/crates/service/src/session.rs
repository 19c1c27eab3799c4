//! Session state and the stroke workflow, independent of HTTP.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use wdc::{
    apply_messages, dehaze, DehazeConfig, DehazeError, DehazeResult, EwdcMessage, ImageRgb,
    PixelCoord,
};

use crate::preview::{render, PreviewKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrokeKind {
    /// Marks pixels whose estimate should be reset.
    Constraint,
    /// Marks pixels whose current transmission supplies the target.
    Picker,
}

/// A rasterized brush stroke.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    pub kind: StrokeKind,
    pub pixels: Vec<PixelCoord>,
}

/// Where a message's target came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSource {
    /// Mean refined transmission under the picker stroke.
    Picker,
    /// Largest lower bound under the constraint strokes.
    LowerBound,
}

/// A message as applied, with its target resolved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordedMessage {
    pub pixels: Vec<PixelCoord>,
    pub target: f64,
    pub source: TargetSource,
}

impl RecordedMessage {
    fn to_message(&self) -> EwdcMessage {
        EwdcMessage::new(self.pixels.clone(), Some(self.target))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StrokeError {
    #[error("a submission needs at least one constraint stroke")]
    NoConstraint,
    #[error("a submission may hold at most one picker stroke, got {0}")]
    TooManyPickers(usize),
    #[error("stroke {0} has no pixels")]
    EmptyStroke(usize),
    #[error("pixel ({x}, {y}) lies outside the {width}x{height} image")]
    OutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
    #[error(
        "target {target} is below the largest lower bound {bound} under the constraint strokes"
    )]
    Infeasible { target: f64, bound: f64 },
    #[error(transparent)]
    Pipeline(#[from] DehazeError),
}

/// Outcome of one accepted submission.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrokeOutcome {
    pub t_s: f64,
    pub source: TargetSource,
    pub message_count: usize,
    /// Mean transmission over the constraint pixels before and after.
    pub mean_t_before: f64,
    pub mean_t_after: f64,
    /// Mean absolute transmission change over the whole image.
    pub mean_abs_change: f64,
}

/// One image under interactive refinement.
///
/// The current result is always `apply_messages(image, config, messages)`.
#[derive(Clone, Debug)]
pub struct Session {
    image: ImageRgb,
    config: DehazeConfig,
    base: DehazeResult,
    messages: Vec<RecordedMessage>,
    current: DehazeResult,
}

fn mean_over(map: &wdc::ScalarMap, pixels: &[PixelCoord]) -> f64 {
    pixels.iter().map(|p| map.get(p.x, p.y)).sum::<f64>() / pixels.len() as f64
}

impl Session {
    /// Runs the configured pipeline on an already resized image.
    pub fn new(image: ImageRgb, config: DehazeConfig) -> wdc::Result<Self> {
        let base = dehaze(&image, &config)?;
        Ok(Self {
            image,
            config,
            current: base.clone(),
            base,
            messages: Vec::new(),
        })
    }

    /// Rebuilds a session by replaying recorded messages.
    pub fn replay(
        image: ImageRgb,
        config: DehazeConfig,
        messages: Vec<RecordedMessage>,
    ) -> wdc::Result<Self> {
        let mut s = Self::new(image, config)?;
        if !messages.is_empty() {
            s.messages = messages;
            s.resolve()?;
        }
        Ok(s)
    }

    pub fn config(&self) -> &DehazeConfig {
        &self.config
    }

    pub fn messages(&self) -> &[RecordedMessage] {
        &self.messages
    }

    pub fn current(&self) -> &DehazeResult {
        &self.current
    }

    pub fn dims(&self) -> (usize, usize) {
        self.image.dims()
    }

    fn resolve(&mut self) -> wdc::Result<()> {
        self.current = if self.messages.is_empty() {
            self.base.clone()
        } else {
            let msgs: Vec<EwdcMessage> = self
                .messages
                .iter()
                .map(RecordedMessage::to_message)
                .collect();
            apply_messages(&self.image, &self.config, &msgs)?
        };
        Ok(())
    }

    /// Validates the strokes, forms one message, appends it and re-solves.
    pub fn submit(&mut self, strokes: &[Stroke]) -> Result<StrokeOutcome, StrokeError> {
        let (width, height) = self.image.dims();
        for (i, s) in strokes.iter().enumerate() {
            if s.pixels.is_empty() {
                return Err(StrokeError::EmptyStroke(i));
            }
            if let Some(p) = s.pixels.iter().find(|p| !p.in_bounds(width, height)) {
                return Err(StrokeError::OutOfBounds {
                    x: p.x,
                    y: p.y,
                    width,
                    height,
                });
            }
        }
        let pickers: Vec<&Stroke> = strokes
            .iter()
            .filter(|s| s.kind == StrokeKind::Picker)
            .collect();
        if pickers.len() > 1 {
            return Err(StrokeError::TooManyPickers(pickers.len()));
        }
        let constraint: BTreeSet<PixelCoord> = strokes
            .iter()
            .filter(|s| s.kind == StrokeKind::Constraint)
            .flat_map(|s| s.pixels.iter().copied())
            .collect();
        if constraint.is_empty() {
            return Err(StrokeError::NoConstraint);
        }
        let pixels: Vec<PixelCoord> = constraint.into_iter().collect();

        let b = &self.base.lower_bound;
        let bound = pixels
            .iter()
            .map(|p| b.get(p.x, p.y))
            .fold(f64::NEG_INFINITY, f64::max);
        let (target, source) = match pickers.first() {
            Some(p) => {
                let picked: Vec<PixelCoord> = p
                    .pixels
                    .iter()
                    .copied()
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                (
                    mean_over(&self.current.transmission, &picked),
                    TargetSource::Picker,
                )
            }
            None => (bound, TargetSource::LowerBound),
        };
        if target < bound - wdc::messages::TARGET_SLACK {
            return Err(StrokeError::Infeasible { target, bound });
        }

        let before = self.current.transmission.clone();
        self.messages.push(RecordedMessage {
            pixels,
            target,
            source,
        });
        if let Err(e) = self.resolve() {
            self.messages.pop();
            return Err(e.into());
        }
        let pixels = &self.messages.last().expect("just pushed").pixels;
        let after = &self.current.transmission;
        let change = before
            .data()
            .iter()
            .zip(after.data())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / after.len() as f64;
        Ok(StrokeOutcome {
            t_s: target,
            source,
            message_count: self.messages.len(),
            mean_t_before: mean_over(&before, pixels),
            mean_t_after: mean_over(after, pixels),
            mean_abs_change: change,
        })
    }

    /// Drops the last message and re-solves. Returns false if there was none.
    pub fn undo(&mut self) -> wdc::Result<bool> {
        if self.messages.pop().is_none() {
            return Ok(false);
        }
        self.resolve()?;
        Ok(true)
    }

    pub fn preview(&self, kind: PreviewKind) -> wdc::Result<Vec<u8>> {
        render(&self.current, kind)
    }
}
