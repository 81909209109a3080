# check_libraries.py
import importlib
from typing import Iterable, List

# requirement names whose import name differs
IMPORT_NAMES = {
    "opencv-python-headless": "cv2",
    "opencv-python": "cv2",
    "Pillow": "PIL",
    "scikit-learn": "sklearn",
}


def import_name(requirement: str) -> str:
    name = requirement.split(";")[0].strip()
    for sep in ("==", ">=", "<=", "~=", ">", "<", "["):
        name = name.split(sep)[0]
    return IMPORT_NAMES.get(name.strip(), name.strip().replace("-", "_"))


def read_requirements(path: str = "requirements.txt") -> List[str]:
    with open(path, "r") as file:
        return [line.strip() for line in file if line.strip() and not line.startswith("#")]


def check_libraries(libraries: Iterable[str]) -> List[str]:
    missing_libraries = []
    for lib in libraries:
        try:
            importlib.import_module(import_name(lib))
            print(f"{lib}: INSTALLED")
        except ImportError:
            print(f"{lib}: MISSING")
            missing_libraries.append(lib)

    if missing_libraries:
        print("\n⚠️ Missing Libraries Detected!")
        print("You can install them using:")
        print(f"pip install {' '.join(missing_libraries)}")
    else:
        print("\n✅ All libraries are installed!")
    return missing_libraries


if __name__ == "__main__":
    check_libraries(read_requirements())
