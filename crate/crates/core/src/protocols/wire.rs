//! Wire formats of the link, network and request headers.

use thiserror::Error;

pub const HERALD: u8 = 1;
pub const TRACK: u8 = 2;
pub const TRACK_ACK: u8 = 3;
pub const REQUEST: u8 = 4;
pub const COMPLETE: u8 = 5;

pub const DIR_FORWARD: u8 = 0;
pub const DIR_ACK: u8 = 1;
/// Data plane to application: an entanglement object is ready.
pub const DIR_DELIVER: u8 = 2;
/// Application to data plane: the delivered qubit was measured.
pub const DIR_CONSUME: u8 = 3;

/// Address of the controller in `req_h.dst_node`.
pub const CONTROLLER_ADDR: u16 = 0xFFFF;

pub const LINK_H_LEN: usize = 8;
pub const NET_H_LEN: usize = 8;
pub const REQ_H_LEN: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct LinkHeader {
    pub msg_type: u8,
    pub bsm_id: u16,
    pub label: u32,
    pub bell: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct NetHeader {
    pub conn_id: u16,
    pub e2e_seq: u32,
    pub pauli_acc: u8,
    pub direction: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct ReqHeader {
    pub dst_node: u16,
    pub requester: u16,
    pub responder: u16,
    pub req_id: u32,
    pub num_pairs: u16,
    pub conn_id: u16,
}

/// A decoded protocol packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Message {
    Herald(LinkHeader),
    Track(LinkHeader, NetHeader),
    TrackAck(LinkHeader, NetHeader),
    Request(LinkHeader, ReqHeader),
    Complete(LinkHeader, ReqHeader),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("packet truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("unknown msg_type {0}")]
    UnknownType(u8),
}

impl LinkHeader {
    pub fn to_bytes(&self) -> [u8; LINK_H_LEN] {
        let mut b = [0; LINK_H_LEN];
        b[0] = self.msg_type;
        b[1..3].copy_from_slice(&self.bsm_id.to_be_bytes());
        b[3..7].copy_from_slice(&self.label.to_be_bytes());
        b[7] = self.bell;
        b
    }

    pub fn from_bytes(b: &[u8]) -> Self {
        LinkHeader {
            msg_type: b[0],
            bsm_id: u16::from_be_bytes([b[1], b[2]]),
            label: u32::from_be_bytes([b[3], b[4], b[5], b[6]]),
            bell: b[7],
        }
    }
}

impl NetHeader {
    pub fn to_bytes(&self) -> [u8; NET_H_LEN] {
        let mut b = [0; NET_H_LEN];
        b[0..2].copy_from_slice(&self.conn_id.to_be_bytes());
        b[2..6].copy_from_slice(&self.e2e_seq.to_be_bytes());
        b[6] = self.pauli_acc;
        b[7] = self.direction;
        b
    }

    pub fn from_bytes(b: &[u8]) -> Self {
        NetHeader {
            conn_id: u16::from_be_bytes([b[0], b[1]]),
            e2e_seq: u32::from_be_bytes([b[2], b[3], b[4], b[5]]),
            pauli_acc: b[6],
            direction: b[7],
        }
    }
}

impl ReqHeader {
    pub fn to_bytes(&self) -> [u8; REQ_H_LEN] {
        let mut b = [0; REQ_H_LEN];
        b[0..2].copy_from_slice(&self.dst_node.to_be_bytes());
        b[2..4].copy_from_slice(&self.requester.to_be_bytes());
        b[4..6].copy_from_slice(&self.responder.to_be_bytes());
        b[6..10].copy_from_slice(&self.req_id.to_be_bytes());
        b[10..12].copy_from_slice(&self.num_pairs.to_be_bytes());
        b[12..14].copy_from_slice(&self.conn_id.to_be_bytes());
        b
    }

    pub fn from_bytes(b: &[u8]) -> Self {
        ReqHeader {
            dst_node: u16::from_be_bytes([b[0], b[1]]),
            requester: u16::from_be_bytes([b[2], b[3]]),
            responder: u16::from_be_bytes([b[4], b[5]]),
            req_id: u32::from_be_bytes([b[6], b[7], b[8], b[9]]),
            num_pairs: u16::from_be_bytes([b[10], b[11]]),
            conn_id: u16::from_be_bytes([b[12], b[13]]),
        }
    }
}

fn need(b: &[u8], n: usize) -> Result<(), WireError> {
    if b.len() < n {
        Err(WireError::Truncated {
            need: n,
            have: b.len(),
        })
    } else {
        Ok(())
    }
}

impl Message {
    pub fn link(&self) -> LinkHeader {
        match *self {
            Message::Herald(l)
            | Message::Track(l, _)
            | Message::TrackAck(l, _)
            | Message::Request(l, _)
            | Message::Complete(l, _) => l,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(LINK_H_LEN + REQ_H_LEN);
        out.extend_from_slice(&self.link().to_bytes());
        match self {
            Message::Herald(_) => {}
            Message::Track(_, n) | Message::TrackAck(_, n) => out.extend_from_slice(&n.to_bytes()),
            Message::Request(_, r) | Message::Complete(_, r) => {
                out.extend_from_slice(&r.to_bytes())
            }
        }
        out
    }

    /// Decodes a packet. Trailing bytes are ignored.
    pub fn parse(b: &[u8]) -> Result<Self, WireError> {
        need(b, LINK_H_LEN)?;
        let l = LinkHeader::from_bytes(b);
        let rest = &b[LINK_H_LEN..];
        Ok(match l.msg_type {
            HERALD => Message::Herald(l),
            TRACK | TRACK_ACK => {
                need(rest, NET_H_LEN)?;
                let n = NetHeader::from_bytes(rest);
                if l.msg_type == TRACK {
                    Message::Track(l, n)
                } else {
                    Message::TrackAck(l, n)
                }
            }
            REQUEST | COMPLETE => {
                need(rest, REQ_H_LEN)?;
                let r = ReqHeader::from_bytes(rest);
                if l.msg_type == REQUEST {
                    Message::Request(l, r)
                } else {
                    Message::Complete(l, r)
                }
            }
            t => return Err(WireError::UnknownType(t)),
        })
    }

    pub fn request(r: ReqHeader) -> Self {
        Message::Request(
            LinkHeader {
                msg_type: REQUEST,
                ..Default::default()
            },
            r,
        )
    }

    pub fn complete(r: ReqHeader) -> Self {
        Message::Complete(
            LinkHeader {
                msg_type: COMPLETE,
                ..Default::default()
            },
            r,
        )
    }
}
