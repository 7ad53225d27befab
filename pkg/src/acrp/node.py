"""Consortium node: mempool, round-robin block production, chain persistence.

Each node holds the full chain and the replayed state.  The in-process
Network harness wires several nodes together for lifecycle simulations; it
broadcasts submitted transactions to every mempool and lets the scheduled
producer emit the next block, which all peers validate and apply.
"""

from __future__ import annotations

import time
from collections import deque
from pathlib import Path
from typing import Deque, Dict, List, Optional, Sequence, Tuple

from . import keys
from .ledger import (
    ApplyContext,
    Block,
    ChainInvalid,
    GenesisConfig,
    LedgerState,
    MAX_TXS_PER_BLOCK,
    Rejection,
    Transaction,
    apply_timeouts,
    apply_tx,
)


class NotOurTurn(RuntimeError):
    pass


class Node:
    def __init__(self, genesis: GenesisConfig, sk: Optional[keys.SigningKey] = None):
        self.genesis = genesis
        self.sk = sk
        self.state = LedgerState(genesis=genesis)
        self.blocks: List[Block] = []
        self.block_hashes: List[bytes] = []
        self.mempool: Deque[Transaction] = deque()
        self.seen_txs: set = set()
        self.rejection_log: List[Tuple[bytes, Rejection]] = []
        self.applied_count = 0

    @property
    def height(self) -> int:
        return self.state.height

    def next_height(self) -> int:
        return self.state.height + 1

    def next_producer(self) -> bytes:
        members = self.genesis.members
        return members[self.next_height() % len(members)]

    def submit(self, tx: Transaction) -> bytes:
        """Queue a transaction; returns its digest (the tx_ref)."""
        ref = tx.digest()
        if ref not in self.seen_txs:
            self.seen_txs.add(ref)
            self.mempool.append(tx)
        return ref

    def trial_apply(self, tx: Transaction) -> Optional[Rejection]:
        """Would this tx apply on top of the current head?  Non-mutating."""
        scratch = self.state.clone()
        ctx = ApplyContext(self.next_height(), tuple(self.block_hashes))
        return apply_tx(scratch, tx, ctx)

    def produce_block(self, timestamp: Optional[int] = None) -> Block:
        """Produce the next block from the mempool in FIFO order.

        Invalid transactions are excluded and logged, never silently dropped.
        """
        if self.sk is None or self.sk.public_bytes != self.next_producer():
            raise NotOurTurn(f"producer for height {self.next_height()} is not this node")
        if timestamp is None:
            timestamp = int(time.time())
        scratch = self.state.clone()
        ctx = ApplyContext(self.next_height(), tuple(self.block_hashes))
        included: List[Transaction] = []
        while self.mempool and len(included) < MAX_TXS_PER_BLOCK:
            tx = self.mempool.popleft()
            code = apply_tx(scratch, tx, ctx)
            if code is None:
                included.append(tx)
            else:
                self.rejection_log.append((tx.digest(), code))
        prev_hash = self.block_hashes[-1] if self.block_hashes else self.genesis.genesis_hash()
        block = Block.produce(self.sk, self.next_height(), prev_hash, timestamp, included)
        self.receive_block(block)
        return block

    def receive_block(self, block: Block) -> None:
        """Validate and apply a block from a peer (or our own production)."""
        from .ledger import apply_block

        apply_block(self.state, block, self.block_hashes, strict=True)
        self.blocks.append(block)
        self.applied_count += len(block.txs)
        included = {tx.digest() for tx in block.txs}
        if included:
            self.mempool = deque(tx for tx in self.mempool if tx.digest() not in included)

    def tx_inclusion(self, ref: bytes) -> Optional[int]:
        """Height of the block containing the tx, or None if still pending."""
        for block in self.blocks:
            for tx in block.txs:
                if tx.digest() == ref:
                    return block.height
        return None

    def find_tx(self, ref: bytes) -> Optional[Tuple[int, Transaction]]:
        for block in self.blocks:
            for tx in block.txs:
                if tx.digest() == ref:
                    return block.height, tx
        return None

    # chain persistence, consumed by `verify --chain`

    def save_chain(self, directory: str) -> None:
        path = Path(directory)
        path.mkdir(parents=True, exist_ok=True)
        genesis_path = path / "genesis.json"
        if not genesis_path.exists():
            self.genesis.save(str(genesis_path))
        for block in self.blocks:
            blk = path / f"{block.height:08d}.blk"
            if not blk.exists():
                blk.write_bytes(block.to_bytes())


def load_chain(directory: str) -> Tuple[GenesisConfig, List[Block]]:
    from .encoding import DecodeError
    from .ledger import ChainInvalid

    path = Path(directory)
    genesis = GenesisConfig.load(str(path / "genesis.json"))
    blocks = []
    for blk in sorted(path.glob("*.blk")):
        try:
            blocks.append(Block.from_bytes(blk.read_bytes()))
        except (DecodeError, ValueError) as e:
            raise ChainInvalid(int(blk.stem), f"undecodable block: {e}")
    return genesis, blocks


class Network:
    """In-process simulation of a small consortium.

    One Node per member key; transactions broadcast to every mempool; step()
    asks the scheduled producer for a block and delivers it to all peers.
    """

    def __init__(self, genesis: GenesisConfig, member_keys: Sequence[keys.SigningKey]):
        assert tuple(sk.public_bytes for sk in member_keys) == genesis.members
        self.nodes = [Node(genesis, sk) for sk in member_keys]

    def submit(self, tx: Transaction) -> bytes:
        ref = b""
        for node in self.nodes:
            ref = node.submit(tx)
        return ref

    def step(self, timestamp: Optional[int] = None) -> Block:
        producer = next(
            n for n in self.nodes if n.sk.public_bytes == n.next_producer()
        )
        block = producer.produce_block(timestamp)
        for node in self.nodes:
            if node is not producer:
                node.receive_block(block)
        return block

    @property
    def head(self) -> Node:
        return self.nodes[0]
