//! Token ledger whose balance words carry status flags in their top bits.
//!
//! Bit 255 marks an EAI, bit 254 an exchange; bits 0..=253 hold the balance in micro-USD.
//! A transfer out of an exchange sets the recipient's EAI bit. Flags are never cleared by
//! balance changes.

use std::collections::BTreeMap;
use std::io::Read;

use primitive_types::U256;
use serde::Serialize;
use thiserror::Error;

use crate::amount::{Usd, MICROS_PER_USD};
use crate::ingest::{Address, Token, TransferRecord};

pub const EAI_FLAG_BIT: usize = 255;
pub const EXCHANGE_FLAG_BIT: usize = 254;

fn bit(i: usize) -> U256 {
    U256::one() << i
}

/// Mask over bits 0..=253.
pub fn balance_mask() -> U256 {
    bit(EXCHANGE_FLAG_BIT) - 1
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("balance of {0} would reach 2^254")]
    Overflow(Address),
    #[error("{address} holds {balance} micro-USD, cannot send {amount}")]
    InsufficientBalance { address: Address, balance: U256, amount: U256 },
    #[error("script line {line}: {reason}")]
    Script { line: u64, reason: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct PackedAccount(pub U256);

impl PackedAccount {
    pub fn word(&self) -> U256 {
        self.0
    }

    pub fn balance(&self) -> U256 {
        self.0 & balance_mask()
    }

    pub fn is_eai(&self) -> bool {
        self.0.bit(EAI_FLAG_BIT)
    }

    pub fn is_exchange(&self) -> bool {
        self.0.bit(EXCHANGE_FLAG_BIT)
    }

    /// Replaces the balance bits, keeping both flags. Fails if the value needs bit 254 or higher.
    pub fn with_balance(self, balance: U256) -> Option<Self> {
        if balance > balance_mask() {
            return None;
        }
        Some(PackedAccount((self.0 & !balance_mask()) | balance))
    }

    pub fn with_flag(self, bit_index: usize, on: bool) -> Self {
        if on {
            PackedAccount(self.0 | bit(bit_index))
        } else {
            PackedAccount(self.0 & !bit(bit_index))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Eai,
    Exchange,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LedgerEvent {
    Mint { to: Address, amount: U256 },
    Transfer { from: Address, to: Address, amount: U256 },
    FlagChanged { address: Address, flag: Flag, value: bool },
}

#[derive(Debug, Clone, Default)]
pub struct SimLedger {
    accounts: BTreeMap<Address, PackedAccount>,
    log: Vec<LedgerEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AccountState {
    pub balance: String,
    pub is_eai: bool,
    pub is_exchange: bool,
}

impl SimLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Unknown addresses read as the zero word.
    pub fn account(&self, addr: &Address) -> PackedAccount {
        self.accounts.get(addr).copied().unwrap_or_default()
    }

    pub fn balance(&self, addr: &Address) -> U256 {
        self.account(addr).balance()
    }

    pub fn is_eai_flag(&self, addr: &Address) -> bool {
        self.account(addr).is_eai()
    }

    pub fn is_exchange_flag(&self, addr: &Address) -> bool {
        self.account(addr).is_exchange()
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.log
    }

    pub fn accounts(&self) -> impl Iterator<Item = (&Address, &PackedAccount)> {
        self.accounts.iter()
    }

    pub fn total_supply(&self) -> U256 {
        self.accounts.values().fold(U256::zero(), |acc, a| acc + a.balance())
    }

    pub fn mint(&mut self, to: Address, amount: U256) -> Result<(), LedgerError> {
        let acct = self.account(&to);
        let new_balance =
            acct.balance().checked_add(amount).and_then(|b| acct.with_balance(b)).ok_or(LedgerError::Overflow(to))?;
        self.accounts.insert(to, new_balance);
        self.log.push(LedgerEvent::Mint { to, amount });
        Ok(())
    }

    pub fn set_exchange(&mut self, addr: Address, flag: bool) {
        let acct = self.account(&addr).with_flag(EXCHANGE_FLAG_BIT, flag);
        self.accounts.insert(addr, acct);
        self.log.push(LedgerEvent::FlagChanged { address: addr, flag: Flag::Exchange, value: flag });
    }

    pub fn transfer(&mut self, from: Address, to: Address, amount: U256) -> Result<(), LedgerError> {
        self.transfer_with(from, to, amount, false)
    }

    /// With `suppress_flag`, an exchange outflow does not mark the recipient (hacked exchange).
    pub fn transfer_with(
        &mut self,
        from: Address,
        to: Address,
        amount: U256,
        suppress_flag: bool,
    ) -> Result<(), LedgerError> {
        let sender = self.account(&from);
        let debited = sender.balance().checked_sub(amount).ok_or(LedgerError::InsufficientBalance {
            address: from,
            balance: sender.balance(),
            amount,
        })?;
        if from != to {
            let sender = sender.with_balance(debited).expect("smaller balance fits");
            let recipient = self.account(&to);
            let credited = recipient
                .balance()
                .checked_add(amount)
                .and_then(|b| recipient.with_balance(b))
                .ok_or(LedgerError::Overflow(to))?;
            self.accounts.insert(from, sender);
            self.accounts.insert(to, credited);
        }
        self.log.push(LedgerEvent::Transfer { from, to, amount });
        if sender.is_exchange() && !suppress_flag {
            let recipient = self.account(&to);
            if !recipient.is_eai() {
                self.accounts.insert(to, recipient.with_flag(EAI_FLAG_BIT, true));
                self.log.push(LedgerEvent::FlagChanged { address: to, flag: Flag::Eai, value: true });
            }
        }
        Ok(())
    }

    pub fn state_dump(&self) -> BTreeMap<Address, AccountState> {
        self.accounts
            .iter()
            .map(|(a, acct)| {
                (
                    *a,
                    AccountState {
                        balance: format_micros(acct.balance()),
                        is_eai: acct.is_eai(),
                        is_exchange: acct.is_exchange(),
                    },
                )
            })
            .collect()
    }

    /// Executed transfers as records (the ordering key is the event index).
    pub fn transfer_records(&self) -> Vec<TransferRecord> {
        self.log
            .iter()
            .enumerate()
            .filter_map(|(i, e)| match e {
                LedgerEvent::Transfer { from, to, amount } => Some(TransferRecord {
                    ordering_key: i as u64,
                    from: *from,
                    to: *to,
                    amount_usd: Usd::from_micros(if amount.bits() <= 64 { amount.low_u64() } else { u64::MAX }),
                    token: Token::default(),
                    direct: true,
                }),
                _ => None,
            })
            .collect()
    }
}

/// Micro-USD as a 6-decimal string.
pub fn format_micros(v: U256) -> String {
    let m = U256::from(MICROS_PER_USD);
    format!("{}.{:06}", v / m, (v % m).low_u64())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptOp {
    Mint { to: Address, amount: U256 },
    Transfer { from: Address, to: Address, amount: U256, suppress_flag: bool },
    SetExchange { address: Address, flag: bool },
}

/// Parses `op,from,to,amount[,suppress_flag]`.
///
/// - `mint,,<to>,<usd>`
/// - `transfer,<from>,<to>,<usd>[,true]`
/// - `set_exchange,<addr>,,<true|false>` (the address may sit in either column)
pub fn parse_script<R: Read>(input: R) -> Result<Vec<(u64, ScriptOp)>, LedgerError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(input);
    let header = reader.headers().map_err(|e| LedgerError::Script { line: 1, reason: e.to_string() })?.clone();
    if header.len() < 4 || &header[0] != "op" || &header[1] != "from" || &header[2] != "to" || &header[3] != "amount" {
        return Err(LedgerError::Script {
            line: 1,
            reason: "header must be `op,from,to,amount[,suppress_flag]`".into(),
        });
    }
    let mut ops = Vec::new();
    for rec in reader.records() {
        let rec =
            rec.map_err(|e| LedgerError::Script { line: e.position().map_or(0, |p| p.line()), reason: e.to_string() })?;
        let line = rec.position().map_or(0, |p| p.line());
        let fail = |reason: String| LedgerError::Script { line, reason };
        if rec.len() < 4 {
            return Err(fail(format!("expected at least 4 fields, found {}", rec.len())));
        }
        let addr = |s: &str| s.parse::<Address>().map_err(|e| fail(e.to_string()));
        let usd = |s: &str| s.parse::<Usd>().map(|u| U256::from(u.micros())).map_err(|e| fail(e.to_string()));
        let flag = |s: &str| match s.to_ascii_lowercase().as_str() {
            "true" | "1" => Ok(true),
            "false" | "0" | "" => Ok(false),
            other => Err(fail(format!("invalid flag `{other}`"))),
        };
        let op = match &rec[0] {
            "mint" => ScriptOp::Mint { to: addr(&rec[2])?, amount: usd(&rec[3])? },
            "transfer" => ScriptOp::Transfer {
                from: addr(&rec[1])?,
                to: addr(&rec[2])?,
                amount: usd(&rec[3])?,
                suppress_flag: flag(rec.get(4).unwrap_or(""))?,
            },
            "set_exchange" => {
                let target = match (&rec[1], &rec[2]) {
                    (a, "") | ("", a) if !a.is_empty() => a,
                    _ => return Err(fail("set_exchange takes exactly one address".into())),
                };
                ScriptOp::SetExchange { address: addr(target)?, flag: flag(&rec[3])? }
            }
            other => return Err(fail(format!("unknown op `{other}`"))),
        };
        ops.push((line, op));
    }
    Ok(ops)
}

/// Runs a parsed script, stopping at the first failing operation.
pub fn simulate(ops: &[(u64, ScriptOp)]) -> Result<SimLedger, LedgerError> {
    let mut ledger = SimLedger::new();
    for (line, op) in ops {
        let res = match *op {
            ScriptOp::Mint { to, amount } => ledger.mint(to, amount),
            ScriptOp::Transfer { from, to, amount, suppress_flag } => {
                ledger.transfer_with(from, to, amount, suppress_flag)
            }
            ScriptOp::SetExchange { address, flag } => {
                ledger.set_exchange(address, flag);
                Ok(())
            }
        };
        res.map_err(|e| LedgerError::Script { line: *line, reason: e.to_string() })?;
    }
    Ok(ledger)
}
