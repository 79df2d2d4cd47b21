use serde::{Deserialize, Serialize};

/// A location in source text. Lines are 1-based, columns are 0-based byte
/// offsets within the line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Position {
    pub line: u32,
    pub col: u32,
    pub byte: usize,
}

impl Position {
    pub const START: Position = Position {
        line: 1,
        col: 0,
        byte: 0,
    };

    pub fn is_line_start(&self) -> bool {
        self.col == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
    pub byte_start: usize,
    pub byte_end: usize,
}

impl Span {
    pub fn new(start: Position, end: Position) -> Self {
        Span {
            start_line: start.line,
            start_col: start.col,
            end_line: end.line,
            end_col: end.col,
            byte_start: start.byte,
            byte_end: end.byte,
        }
    }

    pub fn start(&self) -> Position {
        Position {
            line: self.start_line,
            col: self.start_col,
            byte: self.byte_start,
        }
    }

    pub fn end(&self) -> Position {
        Position {
            line: self.end_line,
            col: self.end_col,
            byte: self.byte_end,
        }
    }

    /// Smallest span covering both.
    pub fn cover(&self, other: &Span) -> Span {
        let start = if self.byte_start <= other.byte_start {
            self.start()
        } else {
            other.start()
        };
        let end = if self.byte_end >= other.byte_end {
            self.end()
        } else {
            other.end()
        };
        Span::new(start, end)
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.byte_start <= other.byte_start && other.byte_end <= self.byte_end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.byte_start < other.byte_end && other.byte_start < self.byte_end
    }

    pub fn len(&self) -> usize {
        self.byte_end - self.byte_start
    }

    pub fn is_empty(&self) -> bool {
        self.byte_start == self.byte_end
    }

    pub fn text<'a>(&self, source: &'a str) -> &'a str {
        &source[self.byte_start..self.byte_end]
    }
}

/// Maps byte offsets to line/column positions.
#[derive(Debug, Clone)]
pub struct LineIndex {
    starts: Vec<usize>,
    len: usize,
}

impl LineIndex {
    pub fn new(text: &str) -> Self {
        let mut starts = vec![0];
        for (i, b) in text.bytes().enumerate() {
            if b == b'\n' {
                starts.push(i + 1);
            }
        }
        LineIndex {
            starts,
            len: text.len(),
        }
    }

    /// Number of physical lines. A trailing newline does not open a new line.
    pub fn line_count(&self) -> usize {
        if *self.starts.last().unwrap() == self.len {
            self.starts.len() - 1
        } else {
            self.starts.len()
        }
    }

    pub fn position(&self, byte: usize) -> Position {
        let line = match self.starts.binary_search(&byte) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        Position {
            line: line as u32 + 1,
            col: (byte - self.starts[line]) as u32,
            byte,
        }
    }

    /// Start of a 1-based line. `line_count() + 1` maps to the end of text.
    pub fn line_start(&self, line: u32) -> Option<Position> {
        let idx = line.checked_sub(1)? as usize;
        if idx < self.starts.len() {
            Some(Position {
                line,
                col: 0,
                byte: self.starts[idx],
            })
        } else if idx == self.starts.len() {
            Some(Position {
                line,
                col: 0,
                byte: self.len,
            })
        } else {
            None
        }
    }

    /// Byte offset just past the newline ending `line`, or end of text.
    pub fn line_end_inclusive(&self, line: u32) -> usize {
        let idx = line as usize;
        if idx < self.starts.len() {
            self.starts[idx]
        } else {
            self.len
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_index_positions() {
        let idx = LineIndex::new("ab\ncd\n");
        assert_eq!(idx.line_count(), 2);
        assert_eq!(idx.position(4), Position { line: 2, col: 1, byte: 4 });
        assert_eq!(idx.line_start(3).unwrap().byte, 6);
        assert!(idx.line_start(5).is_none());
        assert_eq!(LineIndex::new("x").line_count(), 1);
        assert_eq!(LineIndex::new("").line_count(), 0);
    }
}
