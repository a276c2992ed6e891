//! Socket transport: the same envelopes as in-process delivery, framed over
//! TCP.
//!
//! The coordinator opens one connection per remote party and relays every
//! envelope through it (star topology — remote parties never talk to each
//! other directly). Delivery is lock-step: the coordinator knows how many
//! response envelopes each delivery provokes and reads exactly that many
//! back, so the global message order is identical to the in-process
//! transport and so are the transcripts.
//!
//! A served party lives for one connection: accept, run to the peer's
//! hang-up, drop the actor. Operation counters accumulate in the serving
//! process and are not reported back, which is why a coordinator transcript
//! of a TCP run shows zero ops for remote roles (byte and message meters,
//! counted at the coordinator, are complete).

use std::collections::BTreeMap;
use std::io::ErrorKind;
use std::net::{Shutdown, TcpListener, TcpStream};

use crate::lloyd::OpCounters;
use crate::protocol::actors::{AggregatorActor, ComputeServerActor};
use crate::protocol::engine::PartyChannels;
use crate::protocol::messages::{read_envelope, write_envelope, Message};
use crate::protocol::{Outgoing, PartyId};
use crate::{Error, Result};

fn transport_err(role: PartyId, source: std::io::Error) -> Error {
    Error::Transport { role, round: 0, source }
}

/// Remaps the plain-io errors the framing helpers produce into transport
/// errors naming the party whose channel failed.
fn name_role(role: PartyId) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Io(source) => transport_err(role, source),
        other => other,
    }
}

/// The coordinator's ends of the per-party connections.
pub(crate) struct TcpChannels {
    compute: Vec<TcpStream>,
    aggregator: TcpStream,
}

impl TcpChannels {
    /// Connects to every remote party; `compute[i]` serves server `i + 1`.
    pub(crate) fn connect(compute: &[String], aggregator: &str) -> Result<TcpChannels> {
        let open = |addr: &str, role: PartyId| -> Result<TcpStream> {
            let stream =
                TcpStream::connect(addr).map_err(|source| transport_err(role, source))?;
            let _ = stream.set_nodelay(true);
            Ok(stream)
        };
        Ok(TcpChannels {
            compute: compute
                .iter()
                .enumerate()
                .map(|(i, addr)| open(addr, PartyId::ComputeServer(i + 1)))
                .collect::<Result<_>>()?,
            aggregator: open(aggregator, PartyId::Aggregator)?,
        })
    }

    fn stream_for(&mut self, to: PartyId) -> Result<&mut TcpStream> {
        match to {
            PartyId::ComputeServer(i) => self.compute.get_mut(i.wrapping_sub(1)),
            PartyId::Aggregator => Some(&mut self.aggregator),
            PartyId::Owner => None,
        }
        .ok_or_else(|| Error::Protocol {
            role: PartyId::Owner,
            round: 0,
            msg: format!("no connection to {to}"),
        })
    }
}

impl PartyChannels for TcpChannels {
    fn request(
        &mut self,
        from: PartyId,
        to: PartyId,
        _message: &Message,
        body: &[u8],
        expect_replies: usize,
    ) -> Result<Vec<(PartyId, Message, Vec<u8>)>> {
        let stream = self.stream_for(to)?;
        write_envelope(stream, from, to, body).map_err(name_role(to))?;
        let mut replies = Vec::with_capacity(expect_replies);
        for _ in 0..expect_replies {
            let (route, reply_body) = read_envelope(stream).map_err(name_role(to))?;
            if route.from != to {
                return Err(Error::Protocol {
                    role: to,
                    round: 0,
                    msg: format!("reply claims to be from {}", route.from),
                });
            }
            let message = Message::decode(&reply_body)?;
            replies.push((route.to, message, reply_body));
        }
        Ok(replies)
    }

    fn hosted_ops(&mut self) -> BTreeMap<PartyId, OpCounters> {
        BTreeMap::new()
    }

    fn hosted_round_labels(&mut self) -> Vec<Vec<Vec<(u64, usize)>>> {
        Vec::new()
    }

    fn shutdown(&mut self) -> Result<()> {
        for stream in self.compute.iter().chain(std::iter::once(&self.aggregator)) {
            let _ = stream.shutdown(Shutdown::Both);
        }
        Ok(())
    }
}

/// Whichever actor a served connection hosts.
enum HostedActor {
    Server(ComputeServerActor),
    Aggregator(AggregatorActor),
}

impl HostedActor {
    fn handle(&mut self, message: &Message, body: &[u8]) -> Result<Vec<Outgoing>> {
        match self {
            HostedActor::Server(actor) => actor.handle(message, body),
            HostedActor::Aggregator(actor) => actor.handle(message, body),
        }
    }
}

/// Hosts `role` on one established connection until the peer hangs up.
///
/// Every received envelope must be addressed to `role`; responses are
/// written back for the coordinator to relay. A clean peer close (or reset
/// during shutdown) ends the session without error.
pub fn serve_connection(mut stream: TcpStream, role: PartyId) -> Result<()> {
    let _ = stream.set_nodelay(true);
    let mut actor = match role {
        PartyId::ComputeServer(0) => {
            return Err(Error::InvalidParameter("server indices start at 1".into()))
        }
        PartyId::ComputeServer(i) => HostedActor::Server(ComputeServerActor::new(i)),
        PartyId::Aggregator => HostedActor::Aggregator(AggregatorActor::new()),
        PartyId::Owner => {
            return Err(Error::InvalidParameter(
                "the owner drives runs and is not a served role".into(),
            ))
        }
    };

    loop {
        let (route, body) = match read_envelope(&mut stream) {
            Ok(envelope) => envelope,
            Err(Error::Io(e)) if session_closed(&e) => return Ok(()),
            Err(other) => return Err(other),
        };
        if route.to != role {
            return Err(Error::Protocol {
                role,
                round: 0,
                msg: format!("received an envelope addressed to {}", route.to),
            });
        }
        let message = Message::decode(&body)?;
        for out in actor.handle(&message, &body)? {
            let reply = out.message.encode()?;
            write_envelope(&mut stream, role, out.to, &reply).map_err(name_role(role))?;
        }
    }
}

fn session_closed(e: &std::io::Error) -> bool {
    matches!(
        e.kind(),
        ErrorKind::UnexpectedEof | ErrorKind::ConnectionReset | ErrorKind::ConnectionAborted
    )
}

/// Accept loop: serves `role` to one connection at a time, a fresh actor
/// per connection, until accepting or serving fails. Runs forever on a
/// healthy listener — daemons are stopped by killing the process.
pub fn serve(listener: &TcpListener, role: PartyId) -> Result<()> {
    loop {
        let (stream, _) = listener.accept().map_err(|source| transport_err(role, source))?;
        serve_connection(stream, role)?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::protocol::engine::{run, RunConfig, Transport};

    fn spawn_party(role: PartyId) -> (String, std::thread::JoinHandle<Result<()>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        let handle = std::thread::spawn(move || match listener.accept() {
            Ok((stream, _)) => serve_connection(stream, role),
            Err(e) => Err(transport_err(role, e)),
        });
        (addr, handle)
    }

    #[test]
    fn tcp_run_matches_the_in_process_run_bit_for_bit() {
        let ds = Dataset::from_rows(vec![
            vec![1.0, 2.0],
            vec![2.0, 1.0],
            vec![1.5, 1.5],
            vec![9.0, 8.0],
            vec![10.0, 9.0],
            vec![9.5, 8.5],
        ])
        .unwrap();
        let base = RunConfig { seed: 42, ..RunConfig::default() };

        let local = run(&ds, &base).unwrap();

        let (addr1, h1) = spawn_party(PartyId::ComputeServer(1));
        let (addr2, h2) = spawn_party(PartyId::ComputeServer(2));
        let (addr3, h3) = spawn_party(PartyId::Aggregator);
        let cfg = RunConfig {
            transport: Transport::Tcp { compute: vec![addr1, addr2], aggregator: addr3 },
            ..base
        };
        let remote = run(&ds, &cfg).unwrap();
        h1.join().unwrap().unwrap();
        h2.join().unwrap().unwrap();
        h3.join().unwrap().unwrap();

        assert_eq!(remote.labels, local.labels);
        assert_eq!(remote.centers, local.centers);
        assert_eq!(remote.iterations, local.iterations);
        assert_eq!(remote.converged, local.converged);

        // Same envelopes in the same order, so the logs and byte meters
        // agree; only hosted-op counters differ (remote parties keep theirs).
        let local_log = serde_json::to_string(&local.transcript.messages).unwrap();
        let remote_log = serde_json::to_string(&remote.transcript.messages).unwrap();
        assert_eq!(local_log, remote_log);
        for i in 1..base.t {
            let party = PartyId::ComputeServer(i);
            assert_eq!(
                local.transcript.counters_for(party).bytes_sent,
                remote.transcript.counters_for(party).bytes_sent
            );
            assert_eq!(remote.transcript.counters_for(party).ops, OpCounters::default());
        }
    }

    #[test]
    fn owner_cannot_be_served() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let client = std::thread::spawn(move || {
            let _stream = TcpStream::connect(addr).unwrap();
        });
        let (stream, _) = listener.accept().unwrap();
        let err = serve_connection(stream, PartyId::Owner).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
        client.join().unwrap();
    }

    #[test]
    fn connection_refused_names_the_failing_role() {
        let ds = Dataset::from_rows(vec![vec![1.0], vec![2.0], vec![9.0]]).unwrap();
        // Bind-then-drop to get a port nothing listens on.
        let dead = {
            let l = TcpListener::bind("127.0.0.1:0").unwrap();
            l.local_addr().unwrap().to_string()
        };
        let cfg = RunConfig {
            t: 2,
            transport: Transport::Tcp { compute: vec![dead.clone()], aggregator: dead },
            ..RunConfig::default()
        };
        let err = run(&ds, &cfg).unwrap_err();
        match err {
            Error::Transport { role, .. } => assert_eq!(role, PartyId::ComputeServer(1)),
            other => panic!("expected a transport error, got {other:?}"),
        }
    }
}
