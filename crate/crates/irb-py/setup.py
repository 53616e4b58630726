"""Build the irblib extension by delegating to cargo.

No setuptools-rust/maturin dependency: the extension is a plain cdylib that
cargo produces; we just copy it to wherever setuptools wants the module.
Use `pip install -e . --no-build-isolation`.
"""

import shutil
import subprocess
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

WORKSPACE = Path(__file__).resolve().parents[2]


class CargoBuildExt(build_ext):
    def build_extension(self, ext):
        subprocess.run(
            ["cargo", "build", "--release", "-p", "irb-py"],
            cwd=WORKSPACE,
            check=True,
        )
        built = WORKSPACE / "target" / "release" / "libirblib.so"
        dest = Path(self.get_ext_fullpath(ext.name))
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(built, dest)


setup(
    ext_modules=[Extension("irblib", sources=[])],
    cmdclass={"build_ext": CargoBuildExt},
)
