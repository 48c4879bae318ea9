//! Real-network backend: one wire frame per UDP datagram.

use std::io;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::time::Duration;

use thiserror::Error;

/// Largest datagram we accept; frames are 70 or 88 bytes.
const RECV_BUF: usize = 2048;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("cannot resolve {addr}: {source}")]
    Resolve { addr: String, source: io::Error },
    #[error("bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: io::Error },
    #[error("send to {peer}: {source}")]
    Send { peer: SocketAddr, source: io::Error },
    #[error("receive on {local}: {source}")]
    Recv { local: SocketAddr, source: io::Error },
    #[error("transport closed")]
    Closed,
}

/// Message-oriented, possibly lossy transport shared by both session roles.
pub trait Transport: Send + Sync {
    fn send(&self, bytes: &[u8]) -> Result<(), TransportError>;

    /// Next message, or `None` when `timeout` elapses first.
    fn recv_timeout(&self, timeout: Duration) -> Result<Option<Vec<u8>>, TransportError>;
}

#[derive(Debug)]
pub struct UdpTransport {
    socket: UdpSocket,
    local: SocketAddr,
    peer: SocketAddr,
}

fn resolve(addr: &str) -> Result<SocketAddr, TransportError> {
    addr.to_socket_addrs()
        .and_then(|mut it| {
            it.next()
                .ok_or_else(|| io::Error::new(io::ErrorKind::NotFound, "no address"))
        })
        .map_err(|source| TransportError::Resolve {
            addr: addr.to_string(),
            source,
        })
}

impl UdpTransport {
    /// Binds `bind_addr` and sends every frame to `peer_addr`. Datagrams from
    /// other sources are still delivered; filtering is by session id.
    pub fn new(bind_addr: &str, peer_addr: &str) -> Result<Self, TransportError> {
        let bind = resolve(bind_addr)?;
        let peer = resolve(peer_addr)?;
        let socket = UdpSocket::bind(bind).map_err(|source| TransportError::Bind { addr: bind, source })?;
        let local = socket
            .local_addr()
            .map_err(|source| TransportError::Bind { addr: bind, source })?;
        Ok(Self { socket, local, peer })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local
    }

    pub fn peer_addr(&self) -> SocketAddr {
        self.peer
    }

    pub fn set_peer(&mut self, peer: SocketAddr) {
        self.peer = peer;
    }
}

impl Transport for UdpTransport {
    fn send(&self, bytes: &[u8]) -> Result<(), TransportError> {
        self.socket
            .send_to(bytes, self.peer)
            .map(|_| ())
            .map_err(|source| TransportError::Send {
                peer: self.peer,
                source,
            })
    }

    fn recv_timeout(&self, timeout: Duration) -> Result<Option<Vec<u8>>, TransportError> {
        // a zero timeout means "block forever" to the OS
        let timeout = timeout.max(Duration::from_micros(1));
        self.socket
            .set_read_timeout(Some(timeout))
            .map_err(|source| TransportError::Recv {
                local: self.local,
                source,
            })?;
        let mut buf = [0u8; RECV_BUF];
        match self.socket.recv_from(&mut buf) {
            Ok((n, _from)) => Ok(Some(buf[..n].to_vec())),
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => Ok(None),
            Err(source) => Err(TransportError::Recv {
                local: self.local,
                source,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loopback_identity() {
        let a = UdpTransport::new("127.0.0.1:0", "127.0.0.1:9").unwrap();
        let mut b = UdpTransport::new("127.0.0.1:0", &a.local_addr().to_string()).unwrap();
        let mut a = a;
        a.set_peer(b.local_addr());
        b.set_peer(a.local_addr());
        let payload: Vec<u8> = (0..88).collect();
        b.send(&payload).unwrap();
        let got = a.recv_timeout(Duration::from_secs(2)).unwrap();
        assert_eq!(got.as_deref(), Some(&payload[..]));
    }

    #[test]
    fn timeout_yields_none() {
        let a = UdpTransport::new("127.0.0.1:0", "127.0.0.1:9").unwrap();
        assert_eq!(a.recv_timeout(Duration::from_millis(10)).unwrap(), None);
    }

    #[test]
    fn bad_address_has_context() {
        let err = UdpTransport::new("not-an-address", "127.0.0.1:9").unwrap_err();
        assert!(err.to_string().contains("not-an-address"));
    }
}
