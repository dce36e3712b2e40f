//! Photon time-tag streams and the `qlink-timetag v1` text format.
//!
//! Timestamps are integer picoseconds since the run epoch. A file is a
//! header line followed by one event per line:
//!
//! ```text
//! #qlink-timetag v1 epoch=2004-06-01T00:00:00Z
//! 0,fire
//! 301876,return
//! ```

mod sim;

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use sim::{
    simulate_background, simulate_ground_target, simulate_pass_returns, simulate_star_counts,
    DetectorModel, GroundTargetRun, PassRun, ScintillationModel, StarRun, Tone,
};

/// Epoch label used when a scenario does not set one.
pub const DEFAULT_EPOCH: &str = "2000-01-01T00:00:00Z";

const HEADER_PREFIX: &str = "#qlink-timetag v1 epoch=";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Fire,
    Return,
    Background,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Fire => "fire",
            Channel::Return => "return",
            Channel::Background => "background",
        }
    }

    /// Detector channels, everything but laser fires.
    pub fn is_detection(self) -> bool {
        self != Channel::Fire
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "fire" => Ok(Channel::Fire),
            "return" => Ok(Channel::Return),
            "background" => Ok(Channel::Background),
            other => Err(format!("unknown channel `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhotonEvent {
    /// Picoseconds since the run epoch.
    pub timestamp: u64,
    pub channel: Channel,
}

impl PhotonEvent {
    pub fn new(timestamp: u64, channel: Channel) -> Self {
        Self { timestamp, channel }
    }

    pub fn seconds(&self) -> f64 {
        self.timestamp as f64 * 1e-12
    }
}

/// A time-ordered event stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeTagStream {
    epoch: String,
    events: Vec<PhotonEvent>,
    /// Nominal run length in picoseconds, when known.
    duration_ps: Option<u64>,
}

impl TimeTagStream {
    pub fn empty(epoch: impl Into<String>) -> Self {
        Self {
            epoch: epoch.into(),
            events: Vec::new(),
            duration_ps: None,
        }
    }

    /// Wraps already ordered events; fails if they are not sorted.
    pub fn from_sorted(epoch: impl Into<String>, events: Vec<PhotonEvent>) -> Result<Self> {
        if let Some(i) = events.windows(2).position(|w| w[1].timestamp < w[0].timestamp) {
            return Err(Error::Format {
                line: i + 3,
                reason: "events are not sorted by timestamp".into(),
            });
        }
        Ok(Self {
            epoch: epoch.into(),
            events,
            duration_ps: None,
        })
    }

    /// Sorts by timestamp, breaking ties by channel.
    pub fn from_unsorted(epoch: impl Into<String>, mut events: Vec<PhotonEvent>) -> Self {
        events.sort_by_key(|e| (e.timestamp, e.channel));
        Self {
            epoch: epoch.into(),
            events,
            duration_ps: None,
        }
    }

    pub fn with_duration_ps(mut self, duration_ps: u64) -> Self {
        self.duration_ps = Some(duration_ps);
        self
    }

    pub fn epoch(&self) -> &str {
        &self.epoch
    }

    pub fn events(&self) -> &[PhotonEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn duration_ps(&self) -> Option<u64> {
        self.duration_ps
    }

    pub fn count(&self, channel: Channel) -> usize {
        self.events.iter().filter(|e| e.channel == channel).count()
    }

    pub fn channel(&self, channel: Channel) -> impl Iterator<Item = &PhotonEvent> + '_ {
        self.events.iter().filter(move |e| e.channel == channel)
    }

    /// Writes the v1 text format.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{HEADER_PREFIX}{}", self.epoch)?;
        for e in &self.events {
            writeln!(w, "{},{}", e.timestamp, e.channel)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::with_capacity(self.events.len() * 16 + 64);
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("format is ASCII")
    }

    /// Parses the v1 text format. Unsorted input is rejected.
    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = match lines.next() {
            Some(line) => line?,
            None => {
                return Err(Error::Format {
                    line: 1,
                    reason: "missing header".into(),
                })
            }
        };
        let epoch = header
            .strip_prefix(HEADER_PREFIX)
            .filter(|e| !e.is_empty() && !e.contains(char::is_whitespace))
            .ok_or_else(|| Error::Format {
                line: 1,
                reason: format!("expected `{HEADER_PREFIX}<ISO8601>`"),
            })?
            .to_string();

        let mut events = Vec::new();
        let mut last = 0u64;
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            let (ts, ch) = line.split_once(',').ok_or_else(|| Error::Format {
                line: line_no,
                reason: "expected `<timestamp_ps>,<channel>`".into(),
            })?;
            if ts.is_empty() || !ts.bytes().all(|b| b.is_ascii_digit()) {
                return Err(Error::Format {
                    line: line_no,
                    reason: format!("invalid timestamp `{ts}`"),
                });
            }
            let timestamp: u64 = ts.parse().map_err(|e| Error::Format {
                line: line_no,
                reason: format!("invalid timestamp `{ts}`: {e}"),
            })?;
            let channel = ch.parse().map_err(|reason| Error::Format {
                line: line_no,
                reason,
            })?;
            if timestamp < last {
                return Err(Error::Format {
                    line: line_no,
                    reason: format!("unsorted: {timestamp} follows {last}"),
                });
            }
            last = timestamp;
            events.push(PhotonEvent { timestamp, channel });
        }
        Ok(Self {
            epoch,
            events,
            duration_ps: None,
        })
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::read_from(text.as_bytes())
    }
}

/// Sorted merge; on equal timestamps events from `a` come first.
pub fn merge_streams(a: &TimeTagStream, b: &TimeTagStream) -> Result<TimeTagStream> {
    if a.epoch != b.epoch {
        return Err(Error::EpochMismatch {
            left: a.epoch.clone(),
            right: b.epoch.clone(),
        });
    }
    let mut events = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.events.len() && j < b.events.len() {
        if b.events[j].timestamp < a.events[i].timestamp {
            events.push(b.events[j]);
            j += 1;
        } else {
            events.push(a.events[i]);
            i += 1;
        }
    }
    events.extend_from_slice(&a.events[i..]);
    events.extend_from_slice(&b.events[j..]);
    let duration_ps = match (a.duration_ps, b.duration_ps) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, y) => x.or(y),
    };
    Ok(TimeTagStream {
        epoch: a.epoch.clone(),
        events,
        duration_ps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(ts: u64, ch: Channel) -> PhotonEvent {
        PhotonEvent::new(ts, ch)
    }

    #[test]
    fn text_format_is_exact() {
        let s = TimeTagStream::from_sorted(
            "2004-06-01T00:00:00Z",
            vec![ev(0, Channel::Fire), ev(301876, Channel::Return), ev(301876, Channel::Background)],
        )
        .unwrap();
        assert_eq!(
            s.to_text(),
            "#qlink-timetag v1 epoch=2004-06-01T00:00:00Z\n0,fire\n301876,return\n301876,background\n"
        );
        assert_eq!(TimeTagStream::from_text(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn reader_rejects_unsorted() {
        let err = TimeTagStream::from_text("#qlink-timetag v1 epoch=X\n10,fire\n5,return\n").unwrap_err();
        assert_eq!(err, Error::Format { line: 3, reason: "unsorted: 5 follows 10".into() });
    }

    #[test]
    fn reader_rejects_bad_lines() {
        for (text, line) in [
            ("", 1),
            ("#qlink-timetag v2 epoch=X\n", 1),
            ("#qlink-timetag v1 epoch=\n", 1),
            ("#qlink-timetag v1 epoch=X\n10 fire\n", 2),
            ("#qlink-timetag v1 epoch=X\n-1,fire\n", 2),
            ("#qlink-timetag v1 epoch=X\n1,fire\n2,laser\n", 3),
            ("#qlink-timetag v1 epoch=X\n1,fire\n\n", 3),
        ] {
            match TimeTagStream::from_text(text) {
                Err(Error::Format { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?} -> {other:?}"),
            }
        }
    }

    #[test]
    fn merge_examples() {
        let a = TimeTagStream::from_sorted("E", vec![ev(1, Channel::Fire), ev(5, Channel::Return)]).unwrap();
        let b = TimeTagStream::from_sorted("E", vec![ev(1, Channel::Background), ev(3, Channel::Background)]).unwrap();
        assert_eq!(merge_streams(&a, &TimeTagStream::empty("E")).unwrap(), a);
        let m = merge_streams(&a, &b).unwrap();
        assert_eq!(
            m.events(),
            &[ev(1, Channel::Fire), ev(1, Channel::Background), ev(3, Channel::Background), ev(5, Channel::Return)]
        );
        assert!(matches!(merge_streams(&a, &TimeTagStream::empty("F")), Err(Error::EpochMismatch { .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn stream() -> impl Strategy<Value = TimeTagStream> {
            prop::collection::vec((0u64..1_000_000, 0u8..3), 0..200).prop_map(|v| {
                let events = v
                    .into_iter()
                    .map(|(t, c)| {
                        let ch = [Channel::Fire, Channel::Return, Channel::Background][c as usize];
                        PhotonEvent::new(t, ch)
                    })
                    .collect();
                TimeTagStream::from_unsorted("2000-01-01T00:00:00Z", events)
            })
        }

        proptest! {
            #[test]
            fn text_round_trip(s in stream()) {
                prop_assert_eq!(TimeTagStream::from_text(&s.to_text()).unwrap(), s);
            }

            #[test]
            fn merge_sorted_and_conserving(a in stream(), b in stream()) {
                let m = merge_streams(&a, &b).unwrap();
                prop_assert_eq!(m.len(), a.len() + b.len());
                prop_assert!(m.events().windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
                for ch in [Channel::Fire, Channel::Return, Channel::Background] {
                    prop_assert_eq!(m.count(ch), a.count(ch) + b.count(ch));
                }
            }
        }
    }
}
