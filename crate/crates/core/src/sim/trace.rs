//! Line-oriented event log: `time_ms<TAB>module<TAB>node<TAB>event<TAB>details`.

use std::fmt::Write;

use super::SimTime;

#[derive(Debug, Clone, Default)]
pub struct Trace {
    enabled: bool,
    text: String,
    lines: usize,
}

impl Trace {
    pub fn new(enabled: bool) -> Self {
        Trace {
            enabled,
            ..Self::default()
        }
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    pub fn record(&mut self, at: SimTime, module: &str, node: &str, event: &str, details: &str) {
        if !self.enabled {
            return;
        }
        let _ = writeln!(self.text, "{at}\t{module}\t{node}\t{event}\t{details}");
        self.lines += 1;
    }

    pub fn len(&self) -> usize {
        self.lines
    }

    pub fn is_empty(&self) -> bool {
        self.lines == 0
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn lines(&self) -> impl Iterator<Item = TraceLine<'_>> {
        self.text.lines().filter_map(TraceLine::parse)
    }
}

/// One parsed trace line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceLine<'a> {
    pub time: &'a str,
    pub module: &'a str,
    pub node: &'a str,
    pub event: &'a str,
    pub details: &'a str,
}

impl<'a> TraceLine<'a> {
    pub fn parse(line: &'a str) -> Option<Self> {
        let mut it = line.splitn(5, '\t');
        Some(TraceLine {
            time: it.next()?,
            module: it.next()?,
            node: it.next()?,
            event: it.next()?,
            details: it.next()?,
        })
    }

    /// Value of a `key=value` field in the details column.
    pub fn field(&self, key: &str) -> Option<&'a str> {
        self.details
            .split(' ')
            .find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
    }
}
