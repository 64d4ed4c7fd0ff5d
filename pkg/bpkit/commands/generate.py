"""generate: write a synthetic network (and optionally sampled evidence)."""
import argparse
import logging
import sys
from pathlib import Path

from bpkit.commands.common import add_genspec_arguments, gen_spec
from bpkit.exceptions import EXIT_OK
from bpkit.file_handler import serialize_evidence, serialize_network
from bpkit.genbench_utils import generate, sample_evidence

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("generate", help="write a synthetic network")
    add_genspec_arguments(parser)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--output", "-O", metavar="PATH", help="network file (default: stdout)")
    parser.add_argument("--evidence-output", metavar="PATH", help="write the sampled evidence here")
    parser.set_defaults(handler=cmd_generate)


def cmd_generate(args: argparse.Namespace) -> int:
    spec = gen_spec(args, args.seed)
    net = generate(spec)
    text = serialize_network(net)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        logger.info("wrote %s (%s)", args.output, spec.label)
    else:
        sys.stdout.write(text)
    if args.evidence_output:
        ev = sample_evidence(net, spec.evidence_count, spec.seed)
        Path(args.evidence_output).write_text(serialize_evidence(ev), encoding="utf-8")
    return EXIT_OK
