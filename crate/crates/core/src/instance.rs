//! Instances to explain, binary interpretable masks, and the mapping from a
//! mask back to a perturbed instance.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::image::{Rgb, RgbImage};
use crate::sampling::DependencyGroups;
use crate::segmentation::SegmentMap;

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Image(RgbImage),
    /// Ordered tokens. Originals are non-empty; perturbed copies may be empty.
    Text(Vec<String>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub id: String,
    payload: Payload,
}

impl Instance {
    pub fn image(id: impl Into<String>, image: RgbImage) -> Self {
        Self {
            id: id.into(),
            payload: Payload::Image(image),
        }
    }

    pub fn text(id: impl Into<String>, tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return contract("text instance must contain at least one token");
        }
        if let Some(i) = tokens.iter().position(String::is_empty) {
            return contract(format!("token {i} is empty"));
        }
        Ok(Self {
            id: id.into(),
            payload: Payload::Text(tokens),
        })
    }

    /// Text instance without the non-empty checks; perturbed copies and
    /// decoded wire batches may legitimately hold zero tokens.
    pub fn text_unchecked(id: impl Into<String>, tokens: Vec<String>) -> Self {
        Self {
            id: id.into(),
            payload: Payload::Text(tokens),
        }
    }

    /// Splits on Unicode whitespace.
    pub fn from_text(id: impl Into<String>, text: &str) -> Result<Self> {
        Self::text(id, tokenize(text))
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn as_image(&self) -> Option<&RgbImage> {
        match &self.payload {
            Payload::Image(img) => Some(img),
            Payload::Text(_) => None,
        }
    }

    pub fn as_tokens(&self) -> Option<&[String]> {
        match &self.payload {
            Payload::Text(t) => Some(t),
            Payload::Image(_) => None,
        }
    }

    pub fn kind(&self) -> InstanceKind {
        match self.payload {
            Payload::Image(_) => InstanceKind::Image,
            Payload::Text(_) => InstanceKind::Text,
        }
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceKind {
    Image,
    Text,
}

/// Presence/absence vector over interpretable features.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinaryMask(Vec<u8>);

impl BinaryMask {
    pub fn ones(len: usize) -> Self {
        Self(vec![1; len])
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if let Some(i) = bits.iter().position(|&b| b > 1) {
            return contract(format!("mask bit {i} is {} (expected 0 or 1)", bits[i]));
        }
        Ok(Self(bits))
    }

    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Self {
        Self(bits.into_iter().map(u8::from).collect())
    }

    pub fn from_active(len: usize, active: impl IntoIterator<Item = usize>) -> Self {
        let mut bits = vec![0; len];
        for i in active {
            bits[i] = 1;
        }
        Self(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    #[inline]
    pub fn is_set(&self, i: usize) -> bool {
        self.0[i] == 1
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b == 1).map(|(i, _)| i)
    }

    pub fn with_cleared(&self, i: usize) -> Self {
        let mut bits = self.0.clone();
        bits[i] = 0;
        Self(bits)
    }

    /// Elementwise `self <= other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn dot(&self, other: &Self) -> u32 {
        self.0.iter().zip(&other.0).map(|(&a, &b)| u32::from(a & b)).sum()
    }

    /// Squared Euclidean distance, which for binary vectors is the Hamming distance.
    pub fn squared_distance(&self, other: &Self) -> u32 {
        self.0.iter().zip(&other.0).map(|(&a, &b)| u32::from(a ^ b)).sum()
    }
}

impl fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        f.write_str("]")
    }
}

/// Fill used for absent segments.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HideColor {
    #[default]
    Mean,
    Fixed(Rgb),
}

/// The interpretable representation of one instance.
#[derive(Clone, Debug)]
pub enum InterpretableSpace {
    ImageSegments(Arc<SegmentMap>),
    TextGroups(DependencyGroups),
}

impl InterpretableSpace {
    pub fn d_prime(&self) -> usize {
        match self {
            Self::ImageSegments(map) => map.n_segments(),
            Self::TextGroups(groups) => groups.len(),
        }
    }

    pub fn kind(&self) -> InstanceKind {
        match self {
            Self::ImageSegments(_) => InstanceKind::Image,
            Self::TextGroups(_) => InstanceKind::Text,
        }
    }

    /// Checks that `instance` is of the matching modality and size.
    pub fn check_instance(&self, instance: &Instance) -> Result<()> {
        match (self, instance.payload()) {
            (Self::ImageSegments(map), Payload::Image(img)) => {
                if map.width() != img.width() || map.height() != img.height() {
                    return contract(format!(
                        "segment map is {}x{} but image is {}x{}",
                        map.width(),
                        map.height(),
                        img.width(),
                        img.height()
                    ));
                }
                Ok(())
            }
            (Self::TextGroups(groups), Payload::Text(tokens)) => {
                if groups.n_tokens() != tokens.len() {
                    return contract(format!(
                        "groups cover {} tokens but the text has {}",
                        groups.n_tokens(),
                        tokens.len()
                    ));
                }
                Ok(())
            }
            _ => contract("instance modality does not match the interpretable space"),
        }
    }

    pub fn recover(&self, mask: &BinaryMask, original: &Instance, hide: HideColor) -> Result<Instance> {
        match self {
            Self::ImageSegments(map) => recover_image(mask, map, original, hide),
            Self::TextGroups(_) => recover_text(mask, self, original),
        }
    }
}

/// Builds the perturbed image for `mask`: pixels of active segments are
/// copied, pixels of inactive segments take the hide color.
pub fn recover_image(
    mask: &BinaryMask,
    segment_map: &SegmentMap,
    original: &Instance,
    hide: HideColor,
) -> Result<Instance> {
    let Some(img) = original.as_image() else {
        return contract("recover_image requires an image instance");
    };
    if mask.len() != segment_map.n_segments() {
        return contract(format!(
            "mask has {} bits but the segment map has {} segments",
            mask.len(),
            segment_map.n_segments()
        ));
    }
    if segment_map.width() != img.width() || segment_map.height() != img.height() {
        return contract(format!(
            "segment map is {}x{} but image is {}x{}",
            segment_map.width(),
            segment_map.height(),
            img.width(),
            img.height()
        ));
    }
    let fill = match hide {
        HideColor::Mean => img.mean_color(),
        HideColor::Fixed(c) => c,
    };
    let mut out = img.clone();
    for (i, &label) in segment_map.labels().iter().enumerate() {
        if !mask.is_set(label as usize) {
            out.set_pixel(i, fill);
        }
    }
    Ok(Instance::image(original.id.clone(), out))
}

/// Keeps, in original order, exactly the tokens whose group bit is set.
pub fn recover_text(mask: &BinaryMask, space: &InterpretableSpace, original: &Instance) -> Result<Instance> {
    let InterpretableSpace::TextGroups(groups) = space else {
        return contract("recover_text requires a text-group space");
    };
    let Some(tokens) = original.as_tokens() else {
        return contract("recover_text requires a text instance");
    };
    if mask.len() != groups.len() {
        return contract(format!(
            "mask has {} bits but there are {} groups",
            mask.len(),
            groups.len()
        ));
    }
    if groups.n_tokens() != tokens.len() {
        return contract(format!(
            "groups cover {} tokens but the text has {}",
            groups.n_tokens(),
            tokens.len()
        ));
    }
    let kept = tokens
        .iter()
        .enumerate()
        .filter(|&(i, _)| mask.is_set(groups.group_of(i)))
        .map(|(_, t)| t.clone())
        .collect();
    Ok(Instance::text_unchecked(original.id.clone(), kept))
}
