"""Command line interface: node operation, citizen filing, auditing,
authority handling, inspection and offline chain verification.

Mutating verbs sign transactions locally with the key file; the gateway only
relays them.  Failed submissions exit nonzero with the ledger rejection code
on stderr.
"""

from __future__ import annotations

import json
import sys
from typing import Dict, List, Optional, Set

import click

from . import client as cl
from . import keys
from .chunking import ChunkingScheme, ChunkMode, ImageDescriptor
from .ledger import (
    DeletionReason,
    GenesisConfig,
    Status,
    validate_chain,
)
from .node import Network, load_chain
from .report import MICRODEG, Report, ReportType
from .storage import BlobStore


def _api(node_addr: str) -> cl.ApiClient:
    return cl.ApiClient(node_addr)


def _fail(e: Exception) -> None:
    if isinstance(e, cl.GatewayError):
        click.echo(e.detail, err=True)
    else:
        click.echo(str(e), err=True)
    sys.exit(1)


node_addr_option = click.option(
    "--node", "node_addr", envvar="ACRP_NODE_ADDR", default="http://127.0.0.1:8640",
    show_default=True, help="gateway base URL",
)
key_option = click.option(
    "--key", "key_file", envvar="ACRP_KEY_FILE", required=True,
    type=click.Path(exists=True), help="hex-encoded Ed25519 seed file",
)
genesis_option = click.option(
    "--genesis", "genesis_file", envvar="ACRP_GENESIS", required=True,
    type=click.Path(exists=True), help="genesis JSON file",
)


@click.group()
def main():
    """Accountable city report platform."""


@main.command()
@click.option("--out", required=True, type=click.Path(), help="key file to write")
def keygen(out):
    """Generate an Ed25519 keypair; prints the public key."""
    sk, pk = keys.keygen()
    keys.save_key_file(out, sk)
    click.echo(pk.hex())


@main.group()
def node():
    """Consortium node operation."""


@node.command("run")
@genesis_option
@click.option("--keyfile", "key_files", multiple=True, required=True,
              type=click.Path(exists=True), help="member key file (repeatable)")
@click.option("--listen", default="127.0.0.1:8640", show_default=True)
@click.option("--data", "data_dir", type=click.Path(), default=None,
              help="directory for block persistence")
@click.option("--interval", default=0.2, show_default=True, help="block interval seconds")
def node_run(genesis_file, key_files, listen, data_dir, interval):
    """Run gateway and block production for the given member keys."""
    import uvicorn

    from .gateway import Gateway, create_app

    genesis = GenesisConfig.load(genesis_file)
    sks = [keys.load_key_file(p) for p in key_files]
    by_pk = {sk.public_bytes: sk for sk in sks}
    missing = [pk.hex() for pk in genesis.members if pk not in by_pk]
    if missing:
        click.echo(f"warning: no key for members {missing}; their slots will stall", err=True)
    network = Network(genesis, [by_pk[pk] for pk in genesis.members if pk in by_pk])
    store_dir = (data_dir or ".") + "/blobs"
    gw = Gateway(network, BlobStore(store_dir))
    if data_dir:
        orig_step = network.step

        def step_and_save(*a, **kw):
            block = orig_step(*a, **kw)
            network.head.save_chain(data_dir)
            return block

        network.step = step_and_save
    gw.start_producer(interval)
    host, port = listen.rsplit(":", 1)
    app = create_app(gw)
    try:
        uvicorn.run(app, host=host, port=int(port), log_level="warning")
    finally:
        gw.stop()


def _parse_grid(grid: str) -> ChunkingScheme:
    rows, cols = (int(p) for p in grid.lower().split("x"))
    mode = ChunkMode.GridFine if (rows, cols) == (16, 16) else ChunkMode.GridCoarse
    return ChunkingScheme(mode, rows, cols)


def _load_photo(path: str) -> ImageDescriptor:
    from PIL import Image
    import numpy as np

    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return ImageDescriptor.from_array(arr)


@main.group()
def citizen():
    """Citizen verbs: file reports and dispute redactions."""


@citizen.command("file")
@click.option("--type", "rtype", required=True,
              type=click.Choice([t.name for t in ReportType], case_sensitive=False))
@click.option("--lat", required=True, type=float, help="latitude in degrees")
@click.option("--lon", required=True, type=float, help="longitude in degrees")
@click.option("--photo", required=True, type=click.Path(exists=True), help="PNG file")
@click.option("--desc", required=True, help="free-text description")
@click.option("--grid", default="4x4", show_default=True, help="grid as RxC")
@click.option("--regions", "regions_json", default=None,
              help="JSON list of [x,y,w,h] rects for object-based chunking")
@click.option("--save-original", type=click.Path(), default=None,
              help="also write the original evidence blob to this file")
@key_option
@genesis_option
@node_addr_option
def citizen_file(rtype, lat, lon, photo, desc, grid, regions_json, save_original,
                 key_file, genesis_file, node_addr):
    """Announce, wait one block, select the auditor, upload and commit."""
    sk = keys.load_key_file(key_file)
    genesis = GenesisConfig.load(genesis_file)
    img = _load_photo(photo)
    if regions_json:
        regions = tuple(tuple(r) for r in json.loads(regions_json))
        scheme = ChunkingScheme(ChunkMode.ObjectBased, 1, 1, regions)
    else:
        scheme = _parse_grid(grid)
    r = Report(
        next(t for t in ReportType if t.name.lower() == rtype.lower()),
        round(lat * MICRODEG),
        round(lon * MICRODEG),
        img,
        scheme,
        desc,
    )
    api = _api(node_addr)
    try:
        filed = cl.file_report(api, sk, genesis, r)
    except Exception as e:
        _fail(e)
    if save_original:
        from .ledger import pack_original_blob

        with open(save_original, "wb") as f:
            f.write(pack_original_blob(r, filed.signatures))
    click.echo(f"report {filed.report_id.hex()}")
    click.echo(f"announce {filed.announce_ref}")
    click.echo(f"commit {filed.commit_ref}")
    click.echo(f"storage {filed.storage_key.hex()}")
    click.echo(f"auditor {filed.auditor_index}")


@citizen.command("dispute")
@click.option("--report", "report_hex", required=True)
@click.option("--original", "original_file", required=True, type=click.Path(exists=True))
@node_addr_option
def citizen_dispute(report_hex, original_file, node_addr):
    """Release the original report to check a published redaction."""
    api = _api(node_addr)
    with open(original_file, "rb") as f:
        blob = f.read()
    try:
        verdict, diff = cl.dispute(api, bytes.fromhex(report_hex), blob)
    except Exception as e:
        _fail(e)
    click.echo(f"verdict {verdict}")
    if diff:
        click.echo(json.dumps(diff, sort_keys=True))
    if verdict != "Consistent":
        sys.exit(2)


@main.group()
def auditor():
    """Auditor verbs: list pending reports and decide."""


@auditor.command("pending")
@key_option
@node_addr_option
def auditor_pending(key_file, node_addr):
    sk = keys.load_key_file(key_file)
    api = _api(node_addr)
    try:
        reports = cl.pending_reports(api, sk.public_bytes)
    except Exception as e:
        _fail(e)
    for view in reports:
        click.echo(f"{view['report_id']} committed at height {view['commit_height']}")
    if not reports:
        click.echo("no pending reports")


def _parse_redact_spec(spec: str) -> Dict[int, Set[int]]:
    """e.g. 'picture:2,5;description:0' to field index -> chunk index set."""
    out: Dict[int, Set[int]] = {}
    if not spec:
        return out
    for part in spec.split(";"):
        name, _, idxs = part.partition(":")
        field = cl.FIELD_NAMES[name.strip().lower()]
        out[field] = {int(i) for i in idxs.split(",") if i.strip()}
    return out


@auditor.command("decide")
@click.option("--report", "report_hex", required=True)
@click.option("--redact", "redact_spec", default="",
              help="chunk indices per field, e.g. picture:2,5;description:0")
@click.option("--reject", "reject_reason", default=None,
              type=click.Choice([r.name for r in DeletionReason]))
@click.option("--note", default="")
@key_option
@genesis_option
@node_addr_option
def auditor_decide(report_hex, redact_spec, reject_reason, note, key_file,
                   genesis_file, node_addr):
    sk = keys.load_key_file(key_file)
    genesis = GenesisConfig.load(genesis_file)
    api = _api(node_addr)
    rid = bytes.fromhex(report_hex)
    try:
        if reject_reason is not None:
            ref = cl.audit_reject(api, sk, genesis, rid, DeletionReason[reject_reason], note)
        else:
            ref = cl.audit_decide(api, sk, genesis, rid, _parse_redact_spec(redact_spec))
    except Exception as e:
        _fail(e)
    click.echo(f"decision {ref}")


@main.group()
def authority():
    """Authority verbs: status updates and logged deletions."""


@authority.command("update")
@click.option("--report", "report_hex", required=True)
@click.option("--status", "status_name", required=True,
              type=click.Choice([s.name for s in Status]))
@click.option("--note", default="")
@key_option
@genesis_option
@node_addr_option
def authority_update(report_hex, status_name, note, key_file, genesis_file, node_addr):
    sk = keys.load_key_file(key_file)
    genesis = GenesisConfig.load(genesis_file)
    api = _api(node_addr)
    try:
        ref = cl.authority_update(
            api, sk, genesis, bytes.fromhex(report_hex), Status[status_name], note
        )
    except Exception as e:
        _fail(e)
    click.echo(f"status {ref}")


@authority.command("delete")
@click.option("--report", "report_hex", required=True)
@click.option("--reason", "reason_name", required=True,
              type=click.Choice([r.name for r in DeletionReason]))
@click.option("--note", default="")
@key_option
@genesis_option
@node_addr_option
def authority_delete(report_hex, reason_name, note, key_file, genesis_file, node_addr):
    sk = keys.load_key_file(key_file)
    genesis = GenesisConfig.load(genesis_file)
    api = _api(node_addr)
    try:
        ref = cl.authority_delete(
            api, sk, genesis, bytes.fromhex(report_hex), DeletionReason[reason_name], note
        )
    except Exception as e:
        _fail(e)
    click.echo(f"deleted {ref}")


@main.group()
def inspect():
    """Read-only views of the chain and reports."""


@inspect.command("chain")
@node_addr_option
def inspect_chain(node_addr):
    api = _api(node_addr)
    try:
        head = api.get("/v1/chain/head")
    except Exception as e:
        _fail(e)
    click.echo(f"chain {head['chain_id']} height {head['height']} head {head['block_hash']}")


@inspect.command("report")
@click.argument("report_hex")
@node_addr_option
def inspect_report(report_hex, node_addr):
    api = _api(node_addr)
    try:
        view = api.get(f"/v1/reports/{report_hex}")
    except Exception as e:
        _fail(e)
    view.pop("artifacts_b64", None)
    click.echo(json.dumps(view, indent=2, sort_keys=True))


@main.command("verify")
@click.option("--chain", "chain_dir", required=True, type=click.Path(exists=True))
def verify_cmd(chain_dir):
    """Replay a persisted chain from genesis; nonzero exit on any tampering."""
    from .ledger import ChainInvalid

    try:
        genesis, blocks = load_chain(chain_dir)
    except ChainInvalid as e:
        click.echo(f"invalid at height {e.height}: {e.reason}", err=True)
        sys.exit(1)
    state, err = validate_chain(blocks, genesis)
    if err is not None:
        height, reason = err
        click.echo(f"invalid at height {height}: {reason}", err=True)
        sys.exit(1)
    click.echo(f"valid: {len(blocks)} blocks, {len(state.reports)} reports, height {state.height}")


if __name__ == "__main__":
    main()
