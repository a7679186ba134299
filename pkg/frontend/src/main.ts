import { RatingApi } from "./api.js";
import { getRaterId } from "./rater.js";
import { PageController } from "./ui.js";

const controller = new PageController(document, new RatingApi(), getRaterId(localStorage));
void controller.start();
