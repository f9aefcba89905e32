//! Cycle-stamped event traces: arbiter decisions, transfers, ADC passes,
//! IIU expansions, reductions. One event per line in the dump format:
//!
//! ```text
//! <cycle> hct=<id> <kind> <detail>
//! ```

use std::io::Write;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub cycle: u64,
    pub hct: usize,
    pub kind: &'static str,
    pub detail: String,
}

/// In-memory event sink, drained to a file at end of run.
#[derive(Debug, Default, Clone)]
pub struct EventTrace {
    pub events: Vec<TraceEvent>,
    pub enabled: bool,
}

impl EventTrace {
    pub fn enabled() -> Self {
        Self {
            events: Vec::new(),
            enabled: true,
        }
    }

    pub fn push(&mut self, cycle: u64, hct: usize, kind: &'static str, detail: String) {
        if self.enabled {
            self.events.push(TraceEvent {
                cycle,
                hct,
                kind,
                detail,
            });
        }
    }

    /// Events of one kind, in insertion order.
    pub fn of_kind(&self, kind: &str) -> Vec<&TraceEvent> {
        self.events.iter().filter(|e| e.kind == kind).collect()
    }

    pub fn dump(&self, w: &mut dyn Write) -> std::io::Result<()> {
        let mut sorted: Vec<&TraceEvent> = self.events.iter().collect();
        sorted.sort_by_key(|e| e.cycle);
        for e in sorted {
            writeln!(w, "{} hct={} {} {}", e.cycle, e.hct, e.kind, e.detail)?;
        }
        Ok(())
    }
}
