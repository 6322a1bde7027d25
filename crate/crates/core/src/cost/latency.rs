use super::CostError;
use crate::ir::{OpCounts, Opcode, Trace, NUM_OPCODES};

/// One nanosecond per cycle.
pub const DEFAULT_CLOCK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Sw,
    Hw,
}

/// Per-opcode cycle costs for the processor and for accelerator datapaths.
/// `None` marks an opcode with no known latency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatencyTable {
    pub sw: [Option<u32>; NUM_OPCODES],
    pub hw: [Option<u32>; NUM_OPCODES],
}

impl Default for LatencyTable {
    fn default() -> Self {
        use Opcode::*;
        let mut t = LatencyTable { sw: [None; NUM_OPCODES], hw: [None; NUM_OPCODES] };
        for op in Opcode::ALL {
            let (sw, hw) = match op {
                Add | Sub | And | Or | Xor | Shl | AShr | ICmp | FCmp | Select => (1, 1),
                Mul => (3, 3),
                SDiv | SRem => (20, 20),
                FAdd | FSub => (4, 4),
                FMul => (5, 5),
                FDiv => (15, 15),
                ZExt | Trunc => (1, 0),
                SIToFP | FPToSI => (4, 4),
                Load | Store => (4, 2),
                Gep => (1, 1),
                Const | Alloca => (1, 0),
                // accelerator-internal calls are inlined datapaths
                Call => (10, 0),
                Br | Jmp | Ret => (1, 0),
            };
            t.sw[op.index()] = Some(sw);
            t.hw[op.index()] = Some(hw);
        }
        t
    }
}

impl LatencyTable {
    pub fn table(&self, side: Side) -> &[Option<u32>; NUM_OPCODES] {
        match side {
            Side::Sw => &self.sw,
            Side::Hw => &self.hw,
        }
    }

    pub fn set(&mut self, side: Side, op: Opcode, cycles: Option<u32>) {
        match side {
            Side::Sw => self.sw[op.index()] = cycles,
            Side::Hw => self.hw[op.index()] = cycles,
        }
    }

    /// Applies an override such as `sw.mul=4` or `hw.load=1`.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<(), String> {
        let (side, op) = key.split_once('.').ok_or_else(|| format!("latency key `{key}` must look like sw.<op>"))?;
        let side = match side {
            "sw" => Side::Sw,
            "hw" => Side::Hw,
            _ => return Err(format!("latency side `{side}` is neither sw nor hw")),
        };
        let op = Opcode::from_name(op).ok_or_else(|| format!("unknown opcode `{op}`"))?;
        let cycles: u32 = value.trim().parse().map_err(|_| format!("`{value}` is not a cycle count"))?;
        self.set(side, op, Some(cycles));
        Ok(())
    }

    pub fn cycles(&self, side: Side, counts: &OpCounts) -> Result<u64, CostError> {
        let t = self.table(side);
        let mut total = 0u64;
        for op in Opcode::ALL {
            let n = counts.get(op);
            if n == 0 {
                continue;
            }
            let c = t[op.index()].ok_or_else(|| CostError::MissingLatency(op.name().to_owned()))?;
            total += n * u64::from(c);
        }
        Ok(total)
    }
}

fn latency(trace: &Trace, f: &str, table: &LatencyTable, side: Side, clock: f64) -> Result<f64, CostError> {
    match trace.function(f) {
        Some(p) => Ok(table.cycles(side, &p.inclusive_counts)? as f64 * clock),
        None => Ok(0.0),
    }
}

/// Software time of `f` and everything it calls, over the whole trace.
pub fn sw_latency(trace: &Trace, f: &str, table: &LatencyTable, clock: f64) -> Result<f64, CostError> {
    latency(trace, f, table, Side::Sw, clock)
}

pub fn hw_latency(trace: &Trace, f: &str, table: &LatencyTable, clock: f64) -> Result<f64, CostError> {
    latency(trace, f, table, Side::Hw, clock)
}
