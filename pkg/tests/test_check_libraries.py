import pytest

from check_libraries import check_libraries, import_name, read_requirements


@pytest.mark.parametrize("requirement, module", [
    ("opencv-python-headless>=4.8", "cv2"),
    ("Pillow", "PIL"),
    ("scikit-learn==1.4.0", "sklearn"),
    ("numpy", "numpy"),
    ("typing-extensions; python_version<'3.11'", "typing_extensions"),
])
def test_import_name(requirement, module):
    assert import_name(requirement) == module


def test_requirements_skip_comments(tmp_path):
    path = tmp_path / "requirements.txt"
    path.write_text("# stack\nnumpy\n\npandas>=2\n")
    assert read_requirements(str(path)) == ["numpy", "pandas>=2"]


def test_missing_library_is_reported():
    assert check_libraries(["numpy", "surely-not-a-real-module-xyz"]) == ["surely-not-a-real-module-xyz"]
