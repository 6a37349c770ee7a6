//! Max-min fair rates of a few flows over two links, UDP served first.

use bwpred::alloc::{allocate_rates, FlowDemand};
use bwpred::topology::{Dir, Hop};
use bwpred::traffic::Protocol;

fn main() {
    let hop = |link| Hop { link, dir: Dir::AtoB };
    // link 0 carries 10 units, link 1 carries 4 (one slot per direction)
    let capacity = [10.0, 10.0, 4.0, 4.0];
    let both = [hop(0), hop(1)];
    let first = [hop(0)];
    let second = [hop(1)];
    let flows = [
        FlowDemand { protocol: Protocol::Tcp, target: 8.0, path: &both },
        FlowDemand { protocol: Protocol::Tcp, target: 8.0, path: &first },
        FlowDemand { protocol: Protocol::Tcp, target: 1.0, path: &second },
        FlowDemand { protocol: Protocol::Udp, target: 2.0, path: &second },
    ];
    let rates = allocate_rates(&capacity, &flows);
    for (f, r) in flows.iter().zip(&rates) {
        let links: Vec<usize> = f.path.iter().map(|h| h.link).collect();
        println!("{:?} target {:>4} over {:?} -> {:.3}", f.protocol, f.target, links, r);
    }
}
