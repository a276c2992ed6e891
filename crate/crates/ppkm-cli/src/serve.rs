//! `serve`: host one protocol role as a TCP daemon.
//!
//! Binds, announces `listening <addr>` on stdout — with port 0 that is how
//! orchestration learns the actual port — and then serves protocol
//! sessions back to back until killed.

use std::io::Write;
use std::net::TcpListener;

use ppkm::protocol::{tcp, PartyId};

use crate::{CmdError, CmdResult};

#[derive(clap::Args, Debug)]
pub(crate) struct ServeArgs {
    /// Role to host: server1, server2, ... or aggregator
    #[arg(long)]
    role: String,
    /// Address to bind; port 0 picks a free one
    #[arg(long, default_value = "127.0.0.1:0")]
    listen: String,
}

pub(crate) fn cmd_serve(args: ServeArgs) -> CmdResult {
    let role: PartyId = args.role.parse().map_err(CmdError::Usage)?;
    if role == PartyId::Owner {
        return Err(CmdError::Usage("the owner coordinates runs and cannot be served".into()));
    }
    let listener = TcpListener::bind(&args.listen)?;
    let addr = listener.local_addr()?;
    println!("listening {addr}");
    std::io::stdout().flush()?;
    tcp::serve(&listener, role)?;
    Ok(())
}
