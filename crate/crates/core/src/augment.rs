//! The self-supervised pretext dataset: every window appears once as-is and
//! once under each of three reversal transforms.

use serde::{Deserialize, Serialize};

use crate::dsp::Window;
use crate::error::{Error, Result};

/// Which transform produced a pretext sample. Labels follow the 1-based
/// convention 1 = time reversal, 2 = amplitude reversal, 3 = both,
/// 4 = original.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TransformClass {
    TimeReversal,
    AmplitudeReversal,
    TimeAmplitudeReversal,
    Original,
}

impl TransformClass {
    pub const ALL: [TransformClass; 4] = [
        TransformClass::TimeReversal,
        TransformClass::AmplitudeReversal,
        TransformClass::TimeAmplitudeReversal,
        TransformClass::Original,
    ];

    pub fn label(self) -> u8 {
        self.index() as u8 + 1
    }

    /// Zero-based class index, used as the network output position.
    pub fn index(self) -> usize {
        match self {
            TransformClass::TimeReversal => 0,
            TransformClass::AmplitudeReversal => 1,
            TransformClass::TimeAmplitudeReversal => 2,
            TransformClass::Original => 3,
        }
    }

    pub fn from_label(label: u8) -> Result<Self> {
        match label {
            1..=4 => Ok(Self::ALL[label as usize - 1]),
            _ => Err(Error::config(format!("transform label {label} not in 1..=4"))),
        }
    }

    pub fn apply(self, w: &Window) -> Window {
        match self {
            TransformClass::TimeReversal => time_reverse(w),
            TransformClass::AmplitudeReversal => amplitude_reverse(w),
            TransformClass::TimeAmplitudeReversal => time_amplitude_reverse(w),
            TransformClass::Original => w.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub window: Window,
    pub label: TransformClass,
}

pub fn time_reverse(w: &Window) -> Window {
    w.with_values(w.values.iter().rev().copied().collect())
}

pub fn amplitude_reverse(w: &Window) -> Window {
    w.with_values(w.values.iter().map(|v| -v).collect())
}

/// Time reversal followed by amplitude reversal.
pub fn time_amplitude_reverse(w: &Window) -> Window {
    amplitude_reverse(&time_reverse(w))
}

/// Four labelled variants per input window, adjacent, in the order
/// original, time, amplitude, both.
pub fn build_pretext_dataset(windows: &[Window]) -> Result<Vec<LabeledWindow>> {
    if windows.is_empty() {
        return Err(Error::config("pretext dataset needs at least one window"));
    }
    let order = [
        TransformClass::Original,
        TransformClass::TimeReversal,
        TransformClass::AmplitudeReversal,
        TransformClass::TimeAmplitudeReversal,
    ];
    Ok(windows
        .iter()
        .flat_map(|w| {
            order.iter().map(move |&label| LabeledWindow {
                window: label.apply(w),
                label,
            })
        })
        .collect())
}
