#!/usr/bin/env python3
"""Deterministic JSON-lines oracle used to test the bridge client.

Serves a tiny fixed-logit language model over --vocab-size tokens:
the logit of token v in context c is sin(v + 0.7 * sum(c)), so scores are
reproducible without any model download. Flags simulate misbehavior:

  --prepend-foreign  send a response for an unrelated id before each answer
  --silent-method    never answer requests with this method (forces timeouts)
  --error-method     answer this method with an error object
"""

import argparse
import json
import math
import sys


def logits(vocab_size, context):
    shift = 0.7 * sum(context)
    return [math.sin(v + shift) for v in range(vocab_size)]


def logprobs(vocab_size, context):
    raw = logits(vocab_size, context)
    m = max(raw)
    z = math.log(sum(math.exp(x - m) for x in raw)) + m
    return [x - z for x in raw]


def handle(msg, args):
    method = msg.get("method")
    context = msg.get("context_tokens", [])
    if method == args.error_method:
        return {"id": msg.get("id", -1), "error": f"simulated failure in {method}"}
    if method == "next":
        vals = logprobs(args.vocab_size, context)
        return {
            "id": msg["id"],
            "tokens": list(range(args.vocab_size)),
            "logprobs": vals,
        }
    if method == "logits":
        return {
            "id": msg["id"],
            "tokens": list(range(args.vocab_size)),
            "logprobs": logits(args.vocab_size, context),
        }
    if method == "score":
        total = 0.0
        ctx = list(context)
        for t in msg.get("tokens", []):
            total += logprobs(args.vocab_size, ctx)[t]
            ctx.append(t)
        return {"id": msg["id"], "logprob": total}
    return {"id": msg.get("id", -1), "error": f"unknown method {method!r}"}


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--vocab-size", type=int, default=8)
    parser.add_argument("--prepend-foreign", action="store_true")
    parser.add_argument("--silent-method", default=None)
    parser.add_argument("--error-method", default=None)
    args = parser.parse_args()

    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            msg = {}
        if msg.get("method") == args.silent_method:
            continue
        response = handle(msg, args)
        if args.prepend_foreign:
            foreign = {"id": msg.get("id", 0) + 1_000_000, "logprob": -1.0}
            sys.stdout.write(json.dumps(foreign) + "\n")
        sys.stdout.write(json.dumps(response) + "\n")
        sys.stdout.flush()


if __name__ == "__main__":
    main()
