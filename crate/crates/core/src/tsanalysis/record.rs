use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Detector channel. The declaration order is the tie-break order for
/// records sharing a timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    I1,
    I2,
    S1,
    S2,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::I1, Channel::I2, Channel::S1, Channel::S2];

    pub fn is_herald(self) -> bool {
        matches!(self, Channel::I1 | Channel::I2)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::I1 => "I1",
            Channel::I2 => "I2",
            Channel::S1 => "S1",
            Channel::S2 => "S2",
        }
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Channel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "I1" => Ok(Channel::I1),
            "I2" => Ok(Channel::I2),
            "S1" => Ok(Channel::S1),
            "S2" => Ok(Channel::S2),
            other => Err(format!("unknown channel {other:?}")),
        }
    }
}

/// One detector click.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub channel: Channel,
    /// Picoseconds from the start of the run.
    pub time_ps: u64,
    /// Storage attempt the click belongs to, -1 when none.
    pub trial: i64,
    /// Temporal mode index, -1 when not applicable.
    pub mode: i32,
    /// Commanded interferometer phase in radians during fringe scans.
    pub phase_setpoint: Option<f64>,
}

impl DetectionRecord {
    pub fn sort_key(&self) -> (u64, Channel) {
        (self.time_ps, self.channel)
    }
}

pub const CSV_HEADER: [&str; 5] = ["channel", "time_ps", "trial", "mode", "phase_setpoint"];

pub fn write_records<W: Write>(writer: W, records: &[DetectionRecord]) -> Result<(), AnalysisError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Appends records to an already started CSV stream (no header).
pub struct RecordWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(writer: W) -> Result<Self, AnalysisError> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        inner.write_record(CSV_HEADER)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, r: &DetectionRecord) -> Result<(), AnalysisError> {
        self.inner.serialize(r)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), AnalysisError> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Reads a record file and checks that timestamps are nondecreasing.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<DetectionRecord>, AnalysisError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(AnalysisError::BadHeader(headers.iter().collect::<Vec<_>>().join(",")));
    }
    let mut out: Vec<DetectionRecord> = Vec::new();
    for (i, row) in rdr.deserialize().enumerate() {
        let rec: DetectionRecord = row?;
        if let Some(prev) = out.last() {
            if rec.time_ps < prev.time_ps {
                return Err(AnalysisError::Unsorted {
                    line: i as u64 + 2,
                    previous: prev.time_ps,
                    time: rec.time_ps,
                });
            }
        }
        out.push(rec);
    }
    Ok(out)
}

/// Merges per-channel streams into one stream ordered by time, then channel.
pub fn merge_streams(streams: &[Vec<DetectionRecord>]) -> Vec<DetectionRecord> {
    let mut all: Vec<DetectionRecord> = streams.iter().flatten().copied().collect();
    all.sort_by_key(|r| r.sort_key());
    all
}

pub fn check_sorted(times: &[u64]) -> Result<(), AnalysisError> {
    if let Some(i) = times.windows(2).position(|w| w[1] < w[0]) {
        return Err(AnalysisError::Unsorted {
            line: i as u64 + 1,
            previous: times[i],
            time: times[i + 1],
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(channel: Channel, t: u64, phase: Option<f64>) -> DetectionRecord {
        DetectionRecord {
            channel,
            time_ps: t,
            trial: 3,
            mode: -1,
            phase_setpoint: phase,
        }
    }

    #[test]
    fn csv_round_trip() {
        let recs = vec![
            rec(Channel::I1, 10, None),
            rec(Channel::S2, 10, Some(std::f64::consts::FRAC_PI_4)),
            rec(Channel::S1, u64::MAX, Some(-0.1)),
        ];
        let mut buf = Vec::new();
        write_records(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("channel,time_ps,trial,mode,phase_setpoint\n"));
        assert_eq!(read_records(&buf[..]).unwrap(), recs);
    }

    #[test]
    fn unsorted_rejected_with_line() {
        let data = "channel,time_ps,trial,mode,phase_setpoint\nI1,5,0,-1,\nI1,4,0,-1,\n";
        match read_records(data.as_bytes()) {
            Err(AnalysisError::Unsorted { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn merge_breaks_ties_by_channel() {
        let merged = merge_streams(&[
            vec![rec(Channel::S2, 5, None)],
            vec![rec(Channel::I2, 5, None), rec(Channel::I1, 7, None)],
            vec![rec(Channel::S1, 5, None)],
        ]);
        let order: Vec<_> = merged.iter().map(|r| r.channel).collect();
        assert_eq!(order, [Channel::I2, Channel::S1, Channel::S2, Channel::I1]);
    }
}
