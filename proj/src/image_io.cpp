#include "sam3unet/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>

namespace sam3unet {

Tensor load_image_rgb(const std::filesystem::path& path) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_COLOR);  // BGR
  if (img.empty()) throw IoError("cannot read image: " + path.string());
  Tensor out(Shape{3, img.rows, img.cols});
  int64_t hw = static_cast<int64_t>(img.rows) * img.cols;
  for (int y = 0; y < img.rows; ++y) {
    const cv::Vec3b* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.cols; ++x) {
      int64_t i = static_cast<int64_t>(y) * img.cols + x;
      out.data()[0 * hw + i] = row[x][2] / 255.0;  // R
      out.data()[1 * hw + i] = row[x][1] / 255.0;  // G
      out.data()[2 * hw + i] = row[x][0] / 255.0;  // B
    }
  }
  return out;
}

Tensor load_image_gray(const std::filesystem::path& path) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (img.empty()) throw IoError("cannot read image: " + path.string());
  Tensor out(Shape{img.rows, img.cols});
  for (int y = 0; y < img.rows; ++y) {
    const uint8_t* row = img.ptr<uint8_t>(y);
    for (int x = 0; x < img.cols; ++x)
      out.data()[static_cast<int64_t>(y) * img.cols + x] = row[x] / 255.0;
  }
  return out;
}

namespace {

uint8_t to_u8(double v) {
  return static_cast<uint8_t>(std::clamp(std::lround(v * 255.0), 0L, 255L));
}

}  // namespace

void save_image_gray(const std::filesystem::path& path, const Tensor& img) {
  if (img.ndim() != 2) throw ShapeError("save_image_gray: expected (H,W)");
  cv::Mat m(static_cast<int>(img.dim(0)), static_cast<int>(img.dim(1)), CV_8UC1);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x)
      m.at<uint8_t>(y, x) = to_u8(img.data()[static_cast<int64_t>(y) * m.cols + x]);
  if (!cv::imwrite(path.string(), m))
    throw IoError("cannot write image: " + path.string());
}

void save_image_rgb(const std::filesystem::path& path, const Tensor& img) {
  if (img.ndim() != 3 || img.dim(0) != 3)
    throw ShapeError("save_image_rgb: expected (3,H,W)");
  int rows = static_cast<int>(img.dim(1)), cols = static_cast<int>(img.dim(2));
  int64_t hw = static_cast<int64_t>(rows) * cols;
  cv::Mat m(rows, cols, CV_8UC3);
  for (int y = 0; y < rows; ++y)
    for (int x = 0; x < cols; ++x) {
      int64_t i = static_cast<int64_t>(y) * cols + x;
      m.at<cv::Vec3b>(y, x) =
          cv::Vec3b(to_u8(img.data()[2 * hw + i]), to_u8(img.data()[1 * hw + i]),
                    to_u8(img.data()[0 * hw + i]));
    }
  if (!cv::imwrite(path.string(), m))
    throw IoError("cannot write image: " + path.string());
}

}  // namespace sam3unet
