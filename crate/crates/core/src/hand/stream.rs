//! JSON Lines hand-frame streams: one `HandFrame` per line, numbers in
//! shortest round-trip decimal form, absent hands as `null`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use super::HandFrame;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: timestamp {t} is earlier than previous {previous}")]
    Monotonicity { line: usize, t: f64, previous: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl StreamError {
    pub fn line(&self) -> Option<usize> {
        match self {
            StreamError::Parse { line, .. } | StreamError::Monotonicity { line, .. } => Some(*line),
            StreamError::Io(_) => None,
        }
    }
}

/// Iterates the frames of a stream, checking that timestamps never decrease.
/// Blank lines are skipped; line numbers in errors are 1-based.
pub struct FrameReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    previous_t: Option<f64>,
}

impl<R: BufRead> FrameReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: reader.lines(),
            line_no: 0,
            previous_t: None,
        }
    }
}

impl<R: BufRead> Iterator for FrameReader<R> {
    type Item = Result<HandFrame, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let frame: HandFrame = match serde_json::from_str(&line) {
                Ok(f) => f,
                Err(e) => {
                    return Some(Err(StreamError::Parse {
                        line: self.line_no,
                        message: e.to_string(),
                    }))
                }
            };
            if !frame.t.is_finite() {
                return Some(Err(StreamError::Parse {
                    line: self.line_no,
                    message: "timestamp is not finite".into(),
                }));
            }
            if let Some(previous) = self.previous_t {
                if frame.t < previous {
                    return Some(Err(StreamError::Monotonicity {
                        line: self.line_no,
                        t: frame.t,
                        previous,
                    }));
                }
            }
            self.previous_t = Some(frame.t);
            return Some(Ok(frame));
        }
    }
}

pub struct FrameWriter<W: Write> {
    inner: W,
}

impl<W: Write> FrameWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { inner }
    }

    pub fn write(&mut self, frame: &HandFrame) -> Result<(), StreamError> {
        serde_json::to_writer(&mut self.inner, frame).map_err(std::io::Error::from)?;
        self.inner.write_all(b"\n")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), StreamError> {
        self.inner.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

pub fn read_frames(path: impl AsRef<Path>) -> Result<Vec<HandFrame>, StreamError> {
    FrameReader::new(BufReader::new(File::open(path)?)).collect()
}

pub fn write_frames<'a>(
    path: impl AsRef<Path>,
    frames: impl IntoIterator<Item = &'a HandFrame>,
) -> Result<(), StreamError> {
    let mut writer = FrameWriter::new(BufWriter::new(File::create(path)?));
    for frame in frames {
        writer.write(frame)?;
    }
    writer.flush()
}
