# Test driver run inside the sandbox working directory.
# argv: payload.json result-path
import builtins
import io
import json
import os
import re
import sys
import traceback

_open = builtins.open


def _write_result(path, data):
    with _open(path, "w") as fh:
        json.dump(data, fh)


def _describe(exc):
    text = "".join(traceback.format_exception_only(type(exc), exc)).strip()[-2000:]
    # Object addresses differ between runs; keep records reproducible.
    return re.sub(r"0x[0-9a-fA-F]{6,}", "0x?", text)


def _install_guard():
    cwd = os.path.realpath(os.getcwd())

    def guarded_open(file, mode="r", *args, **kwargs):
        if isinstance(file, (str, bytes, os.PathLike)) and any(c in mode for c in "wax+"):
            p = os.path.realpath(os.fsdecode(file))
            if p != cwd and not p.startswith(cwd + os.sep):
                raise PermissionError("write outside sandbox: %s" % p)
        return _open(file, mode, *args, **kwargs)

    def blocked(*args, **kwargs):
        raise PermissionError("operation blocked in sandbox")

    builtins.open = guarded_open
    io.open = guarded_open
    for name in (
        "system", "popen", "remove", "unlink", "rmdir", "removedirs", "rename", "renames",
        "replace", "kill", "killpg", "fork", "forkpty", "execv", "execve", "execvp", "execvpe",
        "execl", "execle", "execlp", "execlpe", "spawnv", "spawnve", "spawnl", "spawnle",
        "chdir", "chmod", "chown", "truncate", "symlink", "link", "putenv", "unsetenv",
    ):
        if hasattr(os, name):
            setattr(os, name, blocked)
    import shutil
    import subprocess

    shutil.rmtree = blocked
    shutil.move = blocked
    subprocess.Popen = blocked
    subprocess.run = blocked
    subprocess.call = blocked
    subprocess.check_call = blocked
    subprocess.check_output = blocked


def _status(exc):
    if isinstance(exc, AssertionError):
        return "fail"
    return "runtime-error"


def main():
    result_path = sys.argv[2]
    try:
        with _open(sys.argv[1]) as fh:
            payload = json.load(fh)
    except Exception as exc:  # infrastructure problem, not the candidate's
        _write_result(result_path, {"program": "sandbox-error", "detail": _describe(exc), "cases": []})
        return
    sys.setrecursionlimit(max(sys.getrecursionlimit(), 10000))
    _install_guard()
    mode = payload["mode"]
    g = {"__name__": "__main__" if mode == "io" else "__candidate__", "__builtins__": builtins}
    out = {"program": "pass", "detail": "", "cases": []}
    try:
        code = compile(payload["program"], "candidate.py", "exec")
        exec(code, g)
    except SystemExit as exc:
        if mode != "io" or exc.code not in (None, 0):
            out["program"] = "runtime-error"
            out["detail"] = "SystemExit(%r)" % (exc.code,)
    except BaseException as exc:
        out["program"] = "runtime-error"
        out["detail"] = _describe(exc)
    if mode == "assert" and out["program"] == "pass":
        try:
            exec(compile(payload.get("setup", ""), "setup.py", "exec"), g)
        except BaseException as exc:
            out["program"] = "runtime-error"
            out["detail"] = "setup: " + _describe(exc)
    if mode == "assert" and out["program"] == "pass":
        for case in payload["cases"]:
            try:
                exec(compile(case, "test.py", "exec"), g)
                out["cases"].append({"status": "pass", "detail": ""})
            except BaseException as exc:
                out["cases"].append({"status": _status(exc), "detail": _describe(exc)})
    try:
        sys.stdout.flush()
    except BaseException:
        pass
    _write_result(result_path, out)


main()
