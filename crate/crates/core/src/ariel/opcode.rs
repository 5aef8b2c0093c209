/// The a-code instruction set. Every instruction is one `(opcode, arg1, arg2)`
/// triplet.
///
/// Guard code is stack based: loads and constants push, comparisons and
/// connectives pop and push a boolean. Selector arguments are either a
/// quantifier depth (`>= 0`) or `-(pool index + 1)` for a literal entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(i32)]
pub enum Opcode {
    Halt = 0,
    PushTrue = 1,
    PushFalse = 2,
    /// Push a thousandths constant split as `(high 32 bits, low 32 bits)`.
    PushConst = 3,
    /// `(metric pool index, selector)`
    LoadMetric = 4,
    CmpLt = 5,
    CmpLe = 6,
    CmpEq = 7,
    CmpNe = 8,
    CmpGe = 9,
    CmpGt = 10,
    And = 11,
    Or = 12,
    Not = 13,
    /// `(entity class, index of matching END)`
    QuantAllBegin = 14,
    /// `(entity class, index of matching BEGIN)`
    QuantAllEnd = 15,
    QuantExistsBegin = 16,
    QuantExistsEnd = 17,
    /// `(selector, _)`
    StatusDown = 18,
    StatusIsolated = 19,
    /// `(target, _)`
    Jump = 20,
    JumpIfFalse = 21,
    /// `(tag pool index, value count)`; values follow the tag in the pool.
    ActEmit = 30,
    /// `(scope, _)` with 0 = LOCAL, 1 = GLOBAL
    ActAlarm = 31,
    /// `(entity pool index, _)`
    ActIsolate = 32,
    /// `(task pool index, level)`
    ActSetPriority = 33,
    /// `(name pool index, value pool index)`
    ActSetParam = 34,
    /// `(method pool index, _)`
    ActCall = 35,
    /// `(m, _)`
    ActSetVoteThreshold = 36,
}

impl Opcode {
    pub const ALL: [Opcode; 29] = [
        Opcode::Halt,
        Opcode::PushTrue,
        Opcode::PushFalse,
        Opcode::PushConst,
        Opcode::LoadMetric,
        Opcode::CmpLt,
        Opcode::CmpLe,
        Opcode::CmpEq,
        Opcode::CmpNe,
        Opcode::CmpGe,
        Opcode::CmpGt,
        Opcode::And,
        Opcode::Or,
        Opcode::Not,
        Opcode::QuantAllBegin,
        Opcode::QuantAllEnd,
        Opcode::QuantExistsBegin,
        Opcode::QuantExistsEnd,
        Opcode::StatusDown,
        Opcode::StatusIsolated,
        Opcode::Jump,
        Opcode::JumpIfFalse,
        Opcode::ActEmit,
        Opcode::ActAlarm,
        Opcode::ActIsolate,
        Opcode::ActSetPriority,
        Opcode::ActSetParam,
        Opcode::ActCall,
        Opcode::ActSetVoteThreshold,
    ];

    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn from_code(code: i32) -> Option<Self> {
        Self::ALL.iter().copied().find(|o| o.code() == code)
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            Opcode::Halt => "HALT",
            Opcode::PushTrue => "PUSH_TRUE",
            Opcode::PushFalse => "PUSH_FALSE",
            Opcode::PushConst => "PUSH_CONST",
            Opcode::LoadMetric => "LOAD_METRIC",
            Opcode::CmpLt => "CMP_LT",
            Opcode::CmpLe => "CMP_LE",
            Opcode::CmpEq => "CMP_EQ",
            Opcode::CmpNe => "CMP_NE",
            Opcode::CmpGe => "CMP_GE",
            Opcode::CmpGt => "CMP_GT",
            Opcode::And => "AND",
            Opcode::Or => "OR",
            Opcode::Not => "NOT",
            Opcode::QuantAllBegin => "QUANT_ALL_BEGIN",
            Opcode::QuantAllEnd => "QUANT_ALL_END",
            Opcode::QuantExistsBegin => "QUANT_EXISTS_BEGIN",
            Opcode::QuantExistsEnd => "QUANT_EXISTS_END",
            Opcode::StatusDown => "STATUS_DOWN",
            Opcode::StatusIsolated => "STATUS_ISOLATED",
            Opcode::Jump => "JUMP",
            Opcode::JumpIfFalse => "JUMP_IF_FALSE",
            Opcode::ActEmit => "ACT_EMIT",
            Opcode::ActAlarm => "ACT_ALARM",
            Opcode::ActIsolate => "ACT_ISOLATE",
            Opcode::ActSetPriority => "ACT_SET_PRIORITY",
            Opcode::ActSetParam => "ACT_SET_PARAM",
            Opcode::ActCall => "ACT_CALL",
            Opcode::ActSetVoteThreshold => "ACT_SET_VOTE_THRESHOLD",
        }
    }

    pub fn is_action(self) -> bool {
        self.code() >= Opcode::ActEmit.code()
    }
}

/// Splits a thousandths constant into the two argument words of PUSH_CONST.
pub fn split_const(milli: i64) -> (i32, i32) {
    ((milli >> 32) as i32, milli as u32 as i32)
}

pub fn join_const(hi: i32, lo: i32) -> i64 {
    ((hi as i64) << 32) | (lo as u32 as i64)
}
