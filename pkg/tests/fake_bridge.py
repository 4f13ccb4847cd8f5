"""Minimal stdin/stdout scorer bridge used to unit-test the client.

Speaks the v1 wire protocol over a table-model spec file. Misbehavior
modes exercise the client's failure handling:

    --mode garbage    answer logprobs requests with non-JSON noise
    --mode truncate   emit half a response line and stall
    --mode wrongid    echo the wrong request id
"""

import argparse
import json
import sys

from genloop.lm import TableModel


def respond(obj):
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")
    sys.stdout.flush()


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--mode", default="normal",
                        choices=["normal", "garbage", "truncate", "wrongid"])
    # bridge-check appends the shared spec path; the first positional wins so
    # tests can pin a deliberately different model
    parser.add_argument("spec", nargs="+")
    args = parser.parse_args()
    model = TableModel.load(args.spec[0])

    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            rid = req["id"]
            op = req["op"]
            if req.get("v") != 1 or op not in ("vocab", "logprobs", "finetune", "shutdown"):
                raise ValueError("bad request")
        except (ValueError, KeyError, TypeError):
            respond({"v": 1, "id": None, "status": "error",
                     "payload": {"message": "malformed request"}})
            continue
        if op == "shutdown":
            respond({"v": 1, "id": rid, "status": "ok", "payload": {}})
            return
        if op == "vocab":
            respond({"v": 1, "id": rid, "status": "ok",
                     "payload": {"tokens": list(model.vocab.tokens),
                                 "capabilities": {"finetune": False}}})
        elif op == "logprobs":
            if args.mode == "garbage":
                sys.stdout.write("%%% not json %%%\n")
                sys.stdout.flush()
                continue
            if args.mode == "truncate":
                sys.stdout.write('{"v": 1, "id":')
                sys.stdout.flush()
                sys.stdin.read()  # stall forever
                return
            vec = model.next_token_logprobs(tuple(req["payload"]["prefix"]))
            rid = rid + 1 if args.mode == "wrongid" else rid
            respond({"v": 1, "id": rid, "status": "ok",
                     "payload": {"logprobs": [float(x) for x in vec]}})
        else:  # finetune unsupported by the test model
            respond({"v": 1, "id": rid, "status": "error",
                     "payload": {"message": "finetune not supported"}})


if __name__ == "__main__":
    main()
