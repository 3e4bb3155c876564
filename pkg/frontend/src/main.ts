import "./style.css";
import { createApp } from "./app";

const root = document.getElementById("app");
if (root) createApp(root);
