"""Persistent execution kernel speaking newline-delimited JSON on stdin/stdout.

Protocol (one JSON object per line):
  shim -> manager  {"type":"hello","version":1}
  manager -> shim  {"type":"execute","id":<int>,"code":<string>}
  shim -> manager  {"type":"result","id":<int>,"status":"success"|"error",
                    "stdout":<string>,"stderr":<string>,
                    "traceback":<string|null>,"new_files":[<string>...]}

The process's own stderr carries diagnostics only.
"""
import ast
import contextlib
import io
import json
import os
import sys
import traceback

os.environ.setdefault("MPLBACKEND", "Agg")

# Keep a private handle on the real stdout for protocol traffic, then point
# fd 1 at stderr so stray writes from child processes cannot corrupt it.
_proto = os.fdopen(os.dup(1), "w", encoding="utf-8", newline="\n")
os.dup2(2, 1)
sys.stdout = io.TextIOWrapper(os.fdopen(1, "wb", closefd=False), encoding="utf-8", line_buffering=True)


def diag(msg):
    sys.__stderr__.write("[shim] %s\n" % msg)
    sys.__stderr__.flush()


def send(obj):
    _proto.write(json.dumps(obj, ensure_ascii=False) + "\n")
    _proto.flush()


def snapshot(root):
    state = {}
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = [d for d in dirnames if d != "__pycache__" and not d.startswith(".")]
        for name in filenames:
            full = os.path.join(dirpath, name)
            try:
                st = os.stat(full)
            except OSError:
                continue
            rel = os.path.relpath(full, root).replace(os.sep, "/")
            state[rel] = (st.st_mtime_ns, st.st_size)
    return state


def run_cell(code, namespace):
    """Runs code; a trailing expression is echoed like an interactive prompt."""
    tree = ast.parse(code, filename="<cell>", mode="exec")
    tail = None
    if tree.body and isinstance(tree.body[-1], ast.Expr):
        tail = ast.Expression(tree.body.pop().value)
    exec(compile(tree, "<cell>", "exec"), namespace)
    if tail is not None:
        value = eval(compile(tail, "<cell>", "eval"), namespace)
        if value is not None:
            print(repr(value))


def main():
    namespace = {"__name__": "__main__"}
    workdir = os.getcwd()
    before = snapshot(workdir)
    send({"type": "hello", "version": 1})
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
            if not isinstance(msg, dict) or msg.get("type") != "execute":
                raise ValueError("expected an execute message")
            msg_id = int(msg["id"])
            code = str(msg["code"])
        except Exception as exc:  # malformed request
            diag("bad request: %s" % exc)
            send({"type": "result", "id": -1, "status": "error", "stdout": "", "stderr": "",
                  "traceback": "ProtocolError: %s" % exc, "new_files": []})
            continue

        out, err = io.StringIO(), io.StringIO()
        status, tb = "success", None
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            try:
                run_cell(code, namespace)
            except BaseException:  # noqa: B902 - the namespace survives any failure
                status, tb = "error", traceback.format_exc()
        after = snapshot(workdir)
        new_files = sorted(k for k, v in after.items() if before.get(k) != v)
        before = after
        send({"type": "result", "id": msg_id, "status": status, "stdout": out.getvalue(),
              "stderr": err.getvalue(), "traceback": tb, "new_files": new_files})
    diag("stdin closed, exiting")


if __name__ == "__main__":
    main()
